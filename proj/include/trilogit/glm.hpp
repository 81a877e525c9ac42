#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "trilogit/demean.hpp"
#include "trilogit/link.hpp"
#include "trilogit/panel.hpp"

namespace trilogit {

struct FitOptions {
  double outer_tol = 1e-9;   // relative deviance change
  double inner_tol = 1e-8;   // max abs entry change per projection sweep
  int max_outer = 100;
  int max_sweeps = 10000;
  double weight_floor = 1e-10;
  double collinearity_rcond = 1e-10;
  bool accelerate = true;
};

struct FitResult {
  Eigen::VectorXd beta;
  LinkEval link;                  // at the optimum
  std::vector<double> residuals;  // y - mu
  double deviance = 0.0;
  std::vector<double> deviance_path;  // per outer iteration, after step control
  int iterations = 0;
  long total_sweeps = 0;
  std::vector<int> sweeps_per_iter;
  bool converged = false;
  long clamp_count = 0;
  FitOptions opts;
};

namespace detail {

// Collinearity guard for the demeaned regressors. A regressor that lies in
// the dummy span loses essentially all of its weighted variation under
// projection, which the Gram condition number alone cannot see when K == 1,
// so the projected/unprojected variation ratio is checked per column as well.
inline void check_collinearity(const Eigen::MatrixXd& gram,
                               const Eigen::VectorXd& raw_scale, double rcond_tol) {
  const int K = static_cast<int>(gram.rows());
  for (int k = 0; k < K; ++k) {
    const double scale = std::max(raw_scale(k), 1e-300);
    if (gram(k, k) <= rcond_tol * scale)
      throw CollinearRegressors("regressor " + std::to_string(k) +
                                " is collinear with the fixed effects");
  }
  Eigen::VectorXd d = gram.diagonal().cwiseSqrt();
  Eigen::MatrixXd corr = d.cwiseInverse().asDiagonal() * gram *
                         d.cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > rcond_tol * hi))
    throw CollinearRegressors("demeaned regressor Gram matrix is ill-conditioned");
}

}  // namespace detail

// Profile MLE of the three-way fixed-effects logit via IRLS. Each iteration
// projects the working response and the regressors onto the complement of
// the dummy span with the current weights, solves the K x K normal equations
// for beta, and recovers the full linear index from the projection identity
// eta = s - (s~ - x~ beta). The incidental parameters are never materialized.
inline FitResult fit_mle(const Panel& panel, const FitOptions& opts = {}) {
  const auto n = static_cast<std::size_t>(panel.n());
  const int K = panel.K();
  if (K < 1) throw std::invalid_argument("at least one regressor required");

  FitResult res;
  res.opts = opts;
  res.beta = Eigen::VectorXd::Zero(K);
  res.link = logistic_link(std::vector<double>(n, 0.0));
  double dev_old = deviance(panel, res.link);

  TripleDemeaner dm(panel);
  std::vector<double> weights(n), s(n), stilde(n);
  std::vector<std::vector<double>> xtilde(static_cast<std::size_t>(K),
                                          std::vector<double>(n));
  // Warm-start storage: dummy-span component per demeaned column.
  std::vector<double> fit_s;
  std::vector<std::vector<double>> fit_x(static_cast<std::size_t>(K));

  const auto& y = panel.y();
  for (int iter = 1; iter <= opts.max_outer; ++iter) {
    double s_scale = 0.0;
    for (std::size_t o = 0; o < n; ++o) {
      double w = res.link.d1[o];
      if (w < opts.weight_floor) {
        w = opts.weight_floor;
        ++res.clamp_count;
      }
      weights[o] = w;
      s[o] = res.link.eta[o] + (y[o] - res.link.mu[o]) / w;
      s_scale = std::max(s_scale, std::abs(s[o]));
    }
    dm.set_weights(weights);
    // The working response is unbounded when an observation drifts toward
    // separation (u / w blows up as w -> 0); beyond a healthy magnitude the
    // per-sweep tolerance switches to relative so those iterations stay
    // bounded and the outer deviance criterion can settle the fit.
    const double tol_s = opts.inner_tol * std::max(1.0, s_scale / 1e3);
    int sweeps = dm.demean(s.data(), stilde.data(), tol_s,
                           opts.max_sweeps, &fit_s, opts.accelerate);
    for (int k = 0; k < K; ++k)
      sweeps += dm.demean(panel.x(k).data(), xtilde[static_cast<std::size_t>(k)].data(),
                          opts.inner_tol, opts.max_sweeps,
                          &fit_x[static_cast<std::size_t>(k)], opts.accelerate);
    res.sweeps_per_iter.push_back(sweeps);
    res.total_sweeps += sweeps;

    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(K, K);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(K);
    Eigen::VectorXd raw_scale = Eigen::VectorXd::Zero(K);
    for (int k = 0; k < K; ++k) {
      const double* xk = xtilde[static_cast<std::size_t>(k)].data();
      const double* xk_raw = panel.x(k).data();
      double rs = 0.0, rhs_k = 0.0;
      for (std::size_t o = 0; o < n; ++o) {
        rs += weights[o] * xk_raw[o] * xk_raw[o];
        rhs_k += weights[o] * xk[o] * stilde[o];
      }
      raw_scale(k) = rs;
      rhs(k) = rhs_k;
      for (int l = k; l < K; ++l) {
        const double* xl = xtilde[static_cast<std::size_t>(l)].data();
        double g = 0.0;
        for (std::size_t o = 0; o < n; ++o) g += weights[o] * xk[o] * xl[o];
        gram(k, l) = gram(l, k) = g;
      }
    }
    detail::check_collinearity(gram, raw_scale, opts.collinearity_rcond);

    Eigen::VectorXd beta_new = gram.ldlt().solve(rhs);
    std::vector<double> eta_new(n);
    for (std::size_t o = 0; o < n; ++o) {
      double fitted = s[o] - stilde[o];
      for (int k = 0; k < K; ++k)
        fitted += xtilde[static_cast<std::size_t>(k)][o] * beta_new(k);
      eta_new[o] = fitted;
    }
    LinkEval link_new = logistic_link(std::move(eta_new));
    double dev_new = deviance(panel, link_new);

    // Step-halving guard: IRLS has no global descent guarantee.
    int halvings = 0;
    while (dev_new > dev_old * (1.0 + 1e-8) && halvings < 10) {
      beta_new = 0.5 * (beta_new + res.beta);
      std::vector<double> eta_half(n);
      for (std::size_t o = 0; o < n; ++o)
        eta_half[o] = 0.5 * (link_new.eta[o] + res.link.eta[o]);
      link_new = logistic_link(std::move(eta_half));
      dev_new = deviance(panel, link_new);
      ++halvings;
    }

    const double rel = std::abs(dev_new - dev_old) / (std::abs(dev_old) + 0.1);
    res.beta = std::move(beta_new);
    res.link = std::move(link_new);
    dev_old = dev_new;
    res.deviance_path.push_back(dev_new);
    res.iterations = iter;
    if (rel < opts.outer_tol) {
      res.converged = true;
      break;
    }
  }
  if (!res.converged)
    throw NonConvergence("IRLS did not converge within max_outer iterations",
                         dev_old);
  res.deviance = dev_old;
  res.residuals.resize(n);
  for (std::size_t o = 0; o < n; ++o) res.residuals[o] = y[o] - res.link.mu[o];
  return res;
}

}  // namespace trilogit
