#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "trilogit/demean.hpp"
#include "trilogit/glm.hpp"
#include "trilogit/link.hpp"
#include "trilogit/panel.hpp"

namespace trilogit {

// Residuals of each regressor from the mu'-weighted least squares on the
// dummy span, evaluated at the converged fit.
struct ProjectionResiduals {
  std::vector<std::vector<double>> xtilde;  // K columns of length n
};

struct BiasComponents {
  Eigen::VectorXd b_alpha, b_gamma, b_rho;
  Eigen::MatrixXd w_hat;
};

struct PanelDims {
  int I = 0, J = 0, T = 0;
  std::int64_t n = 0;
};

struct OddsRatioSet {
  Eigen::VectorXd odds_ratio, se, z;
};

struct CorrectedFit {
  std::vector<std::string> names;
  Eigen::VectorXd beta_uncorrected, beta_debiased;
  Eigen::VectorXd se;  // from W_hat^{-1}/n, used for both coefficient sets
  Eigen::VectorXd z, z_uncorrected;
  BiasComponents bias;
  OddsRatioSet odds_debiased, odds_uncorrected;
  PanelDims dims;
};

inline PanelDims dims_of(const Panel& p) { return {p.I(), p.J(), p.T(), p.n()}; }

inline ProjectionResiduals projection_residuals(const Panel& panel,
                                                const LinkEval& link,
                                                double inner_tol = 1e-8,
                                                int max_sweeps = 10000) {
  ProjectionResiduals pr;
  const auto n = static_cast<std::size_t>(panel.n());
  TripleDemeaner dm(panel);
  dm.set_weights(link.d1);
  pr.xtilde.assign(static_cast<std::size_t>(panel.K()), std::vector<double>(n));
  for (int k = 0; k < panel.K(); ++k)
    dm.demean(panel.x(k).data(), pr.xtilde[static_cast<std::size_t>(k)].data(),
              inner_tol, max_sweeps);
  return pr;
}

// Plug-in bias components: per cell the ratio of the mu''-weighted residual
// sum to the mu'-weight sum, averaged over the family's cells and scaled by
// -1/2. W_hat is the normalized profile Hessian estimate. Cell averages use
// actual member counts, so unbalanced panels are handled by the same code.
inline BiasComponents bias_components(const Panel& panel, const LinkEval& link,
                                      const ProjectionResiduals& pr) {
  const int K = panel.K();
  const auto n = static_cast<std::size_t>(panel.n());
  BiasComponents bc;

  auto family_component = [&](Family f) {
    const CellFamily& fam = panel.cells(f);
    const int nc = fam.count();
    Eigen::VectorXd total = Eigen::VectorXd::Zero(K);
    Eigen::VectorXd num(K);
    for (int c = 0; c < nc; ++c) {
      num.setZero();
      double den = 0.0;
      for (auto o : fam.members[static_cast<std::size_t>(c)]) {
        const auto so = static_cast<std::size_t>(o);
        den += link.d1[so];
        for (int k = 0; k < K; ++k)
          num(k) += link.d2[so] * pr.xtilde[static_cast<std::size_t>(k)][so];
      }
      if (den < 1e-12) throw DegenerateCell(family_name(f), c, den);
      total += num / den;
    }
    return Eigen::VectorXd(-0.5 * total / static_cast<double>(nc));
  };

  bc.b_alpha = family_component(Family::it);
  bc.b_gamma = family_component(Family::jt);
  bc.b_rho = family_component(Family::ij);

  bc.w_hat = Eigen::MatrixXd::Zero(K, K);
  for (std::size_t o = 0; o < n; ++o) {
    for (int k = 0; k < K; ++k)
      for (int l = k; l < K; ++l)
        bc.w_hat(k, l) += link.d1[o] * pr.xtilde[static_cast<std::size_t>(k)][o] *
                          pr.xtilde[static_cast<std::size_t>(l)][o];
  }
  bc.w_hat /= static_cast<double>(panel.n());
  bc.w_hat = bc.w_hat.selfadjointView<Eigen::Upper>();
  return bc;
}

// Analytic correction: each bias component is divided by the per-parameter
// sample size of its fixed-effect family (J observations per alpha_it, I per
// gamma_jt, T per rho_ij), which reduces to B_a/N + B_g/N + B_r/T when I=J=N.
inline CorrectedFit debias(const FitResult& fit, const BiasComponents& bias,
                           const PanelDims& dims,
                           const std::vector<std::string>& names) {
  const int K = static_cast<int>(fit.beta.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(bias.w_hat);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) throw SingularW(lo > 0.0 ? hi / lo : INFINITY);

  Eigen::VectorXd scaled = bias.b_alpha / static_cast<double>(dims.J) +
                           bias.b_gamma / static_cast<double>(dims.I) +
                           bias.b_rho / static_cast<double>(dims.T);
  Eigen::LLT<Eigen::MatrixXd> llt(bias.w_hat);
  Eigen::MatrixXd w_inv = llt.solve(Eigen::MatrixXd::Identity(K, K));

  CorrectedFit cf;
  cf.names = names;
  cf.dims = dims;
  cf.bias = bias;
  cf.beta_uncorrected = fit.beta;
  cf.beta_debiased = fit.beta - w_inv * scaled;
  cf.se.resize(K);
  for (int k = 0; k < K; ++k)
    cf.se(k) = std::sqrt(w_inv(k, k) / static_cast<double>(dims.n));
  cf.z = cf.beta_debiased.cwiseQuotient(cf.se);
  cf.z_uncorrected = cf.beta_uncorrected.cwiseQuotient(cf.se);
  return cf;
}

// Delta-method odds ratios for one coefficient set.
inline OddsRatioSet odds_ratio_set(const Eigen::VectorXd& beta,
                                   const Eigen::VectorXd& se) {
  OddsRatioSet s;
  s.odds_ratio = beta.array().exp();
  s.se = s.odds_ratio.cwiseProduct(se);
  s.z = (s.odds_ratio.array() - 1.0) / s.se.array();
  return s;
}

inline CorrectedFit& odds_ratios(CorrectedFit& cf) {
  cf.odds_uncorrected = odds_ratio_set(cf.beta_uncorrected, cf.se);
  cf.odds_debiased = odds_ratio_set(cf.beta_debiased, cf.se);
  return cf;
}

// Convenience pipeline: projection residuals, bias components, correction and
// odds ratios from a converged fit.
inline CorrectedFit correct_fit(const Panel& panel, const FitResult& fit) {
  ProjectionResiduals pr =
      projection_residuals(panel, fit.link, fit.opts.inner_tol, fit.opts.max_sweeps);
  BiasComponents bc = bias_components(panel, fit.link, pr);
  CorrectedFit cf = debias(fit, bc, dims_of(panel), panel.regressor_names());
  odds_ratios(cf);
  return cf;
}

}  // namespace trilogit
