#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "trilogit/errors.hpp"
#include "trilogit/link.hpp"
#include "trilogit/panel.hpp"

namespace trilogit {

// Dense small-instance machinery: explicit dummy matrix, constraint matrix,
// penalized objective with analytic derivatives, joint Newton solver, and the
// closed-form checks on the incidental-parameter Hessian. This path exists to
// verify the scalable estimator, not to compete with it.

struct DummyBlocks {
  Eigen::MatrixXd w_it, w_jt, w_ij;  // one indicator column per existing cell
};

// Indicator blocks over the panel's actual cells (columns ordered
// lexicographically by label indexes, matching the constraint-row layout).
inline DummyBlocks build_dummies(const Panel& panel, std::int64_t dense_cap = 2000) {
  if (panel.n() > dense_cap) throw TooLargeForDense(panel.n(), dense_cap);
  DummyBlocks b;
  auto fill = [&](Family f, Eigen::MatrixXd& m) {
    const CellFamily& fam = panel.cells(f);
    m = Eigen::MatrixXd::Zero(panel.n(), fam.count());
    for (std::int64_t o = 0; o < panel.n(); ++o)
      m(o, fam.cell_of[static_cast<std::size_t>(o)]) = 1.0;
  };
  fill(Family::it, b.w_it);
  fill(Family::jt, b.w_jt);
  fill(Family::ij, b.w_ij);
  return b;
}

// Full constraint matrix of the normalization v'phi = 0 for the complete
// I x J x T index products: T columns tying the alpha and gamma time sums,
// I columns tying alpha row sums to rho row sums, J columns tying gamma row
// sums to rho column sums. One column is implied by the rest, so the rank is
// T + I + J - 1.
inline Eigen::MatrixXd build_constraints(int I, int J, int T) {
  const int rows = I * T + J * T + I * J;
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(rows, T + I + J);
  for (int i = 0; i < I; ++i)
    for (int t = 0; t < T; ++t) {
      const int r = i * T + t;
      v(r, t) = 1.0;          // time constraint
      v(r, T + i) = 1.0;      // sender constraint
    }
  for (int j = 0; j < J; ++j)
    for (int t = 0; t < T; ++t) {
      const int r = I * T + j * T + t;
      v(r, t) = -1.0;
      v(r, T + I + j) = 1.0;  // receiver constraint
    }
  for (int i = 0; i < I; ++i)
    for (int j = 0; j < J; ++j) {
      const int r = I * T + J * T + i * J + j;
      v(r, T + i) = -1.0;
      v(r, T + I + j) = -1.0;
    }
  return v;
}

struct OracleModel {
  Eigen::MatrixXd w;  // n x p, the three blocks side by side
  Eigen::MatrixXd v;  // p x (T+I+J); rows restricted to existing cells
  int p_alpha = 0, p_gamma = 0, p_rho = 0;
  double c1 = 1.0;
  double scale = 1.0;  // sqrt(NT) convention, N generalized to sqrt(IJ)
  int dim() const { return p_alpha + p_gamma + p_rho; }
};

inline OracleModel build_oracle_model(const Panel& panel, double c1 = 1.0,
                                      std::int64_t dense_cap = 2000) {
  OracleModel m;
  DummyBlocks b = build_dummies(panel, dense_cap);
  m.p_alpha = static_cast<int>(b.w_it.cols());
  m.p_gamma = static_cast<int>(b.w_jt.cols());
  m.p_rho = static_cast<int>(b.w_ij.cols());
  m.w.resize(panel.n(), m.dim());
  m.w << b.w_it, b.w_jt, b.w_ij;
  m.c1 = c1;
  m.scale = std::sqrt(std::sqrt(static_cast<double>(panel.I()) * panel.J()) *
                      panel.T());

  // Constraint rows for the cells that actually occur. On a balanced panel
  // this reproduces the full matrix row for row.
  const int I = panel.I(), J = panel.J(), T = panel.T();
  m.v = Eigen::MatrixXd::Zero(m.dim(), T + I + J);
  int r = 0;
  for (const auto& lab : panel.it_cells().labels) {
    m.v(r, lab[1]) = 1.0;
    m.v(r, T + lab[0]) = 1.0;
    ++r;
  }
  for (const auto& lab : panel.jt_cells().labels) {
    m.v(r, lab[1]) = -1.0;
    m.v(r, T + I + lab[0]) = 1.0;
    ++r;
  }
  for (const auto& lab : panel.ij_cells().labels) {
    m.v(r, T + lab[0]) = -1.0;
    m.v(r, T + I + lab[1]) = -1.0;
    ++r;
  }
  return m;
}

inline Eigen::VectorXd oracle_eta(const OracleModel& m, const Panel& panel,
                                  const Eigen::VectorXd& beta,
                                  const Eigen::VectorXd& phi) {
  Eigen::VectorXd eta = m.w * phi;
  for (int k = 0; k < panel.K(); ++k) {
    const auto& xk = panel.x(k);
    for (std::int64_t o = 0; o < panel.n(); ++o)
      eta(o) += beta(k) * xk[static_cast<std::size_t>(o)];
  }
  return eta;
}

struct ObjectiveEval {
  double value = 0.0;
  Eigen::VectorXd grad;   // (K + dim phi)
  Eigen::MatrixXd hess;   // same order
};

// Penalized objective of the constrained fit: the scaled negative
// log-likelihood plus (c1 / 2 scale) ||v' phi||^2, with analytic gradient and
// Hessian in the stacked (beta, phi) coordinates.
inline ObjectiveEval penalized_objective(const OracleModel& m, const Panel& panel,
                                         const Eigen::VectorXd& beta,
                                         const Eigen::VectorXd& phi,
                                         bool with_derivatives = true) {
  const int K = panel.K();
  const int P = m.dim();
  const auto n = panel.n();

  Eigen::VectorXd eta_vec = oracle_eta(m, panel, beta, phi);
  std::vector<double> eta(eta_vec.data(), eta_vec.data() + n);
  LinkEval link = logistic_link(std::move(eta));

  Eigen::VectorXd vtphi = m.v.transpose() * phi;
  ObjectiveEval ev;
  ev.value = (-log_likelihood(panel, link) + 0.5 * m.c1 * vtphi.squaredNorm()) / m.scale;
  if (!with_derivatives) return ev;

  Eigen::VectorXd u(n);
  Eigen::VectorXd d1(n);
  for (std::int64_t o = 0; o < n; ++o) {
    u(o) = panel.y()[static_cast<std::size_t>(o)] - link.mu[static_cast<std::size_t>(o)];
    d1(o) = link.d1[static_cast<std::size_t>(o)];
  }
  Eigen::MatrixXd x(n, K);
  for (int k = 0; k < K; ++k)
    for (std::int64_t o = 0; o < n; ++o)
      x(o, k) = panel.x(k)[static_cast<std::size_t>(o)];

  ev.grad.resize(K + P);
  ev.grad.head(K) = -(x.transpose() * u) / m.scale;
  ev.grad.tail(P) = (-(m.w.transpose() * u) + m.c1 * (m.v * vtphi)) / m.scale;

  ev.hess.resize(K + P, K + P);
  Eigen::MatrixXd xw = d1.asDiagonal() * m.w;
  ev.hess.topLeftCorner(K, K) = x.transpose() * d1.asDiagonal() * x;
  ev.hess.topRightCorner(K, P) = x.transpose() * xw;
  ev.hess.bottomLeftCorner(P, K) = ev.hess.topRightCorner(K, P).transpose();
  ev.hess.bottomRightCorner(P, P) =
      m.w.transpose() * xw + m.c1 * (m.v * m.v.transpose());
  ev.hess /= m.scale;
  return ev;
}

struct OracleFit {
  Eigen::VectorXd beta, phi;
  Eigen::MatrixXd hessian;  // penalized Hessian at the optimum
  int iterations = 0;
  double grad_norm = 0.0;
};

// Joint Newton on (beta, phi) with step-halving. The penalized objective is
// strictly convex once uninformative observations are removed, so plain
// Newton with an analytic Hessian is enough.
inline OracleFit fit_penalized_newton(const OracleModel& m, const Panel& panel,
                                      double tol = 1e-10, int max_iter = 50) {
  const int K = panel.K();
  const int P = m.dim();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(K + P);
  double value = 0.0;
  OracleFit fit;
  for (int iter = 1; iter <= max_iter; ++iter) {
    ObjectiveEval ev = penalized_objective(m, panel, theta.head(K), theta.tail(P));
    value = ev.value;
    fit.grad_norm = ev.grad.lpNorm<Eigen::Infinity>();
    fit.iterations = iter;
    if (fit.grad_norm <= tol) {
      fit.beta = theta.head(K);
      fit.phi = theta.tail(P);
      fit.hessian = ev.hess;
      return fit;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(ev.hess);
    if (llt.info() != Eigen::Success)
      throw SingularHessian("penalized Hessian is not positive definite");
    Eigen::VectorXd step = llt.solve(ev.grad);
    double scale = 1.0;
    for (int h = 0; h < 40; ++h) {
      Eigen::VectorXd cand = theta - scale * step;
      const double cand_val =
          penalized_objective(m, panel, cand.head(K), cand.tail(P), false).value;
      if (cand_val <= value + 1e-14 * std::abs(value)) {
        theta = std::move(cand);
        break;
      }
      scale *= 0.5;
      if (h == 39) theta -= scale * step;
    }
  }
  throw NonConvergence("penalized Newton did not converge", fit.grad_norm);
}

struct LemmaReport {
  double lambda_min = 0.0;            // smallest eigenvalue of H(beta, phi)
  double c_min = 0.0;                 // min mu'
  double bound_margin = 0.0;          // lambda_min - (3/7) c_min
  double block_inverse_max_err = 0.0; // closed-form A^{-1} vs numeric inverse
  double offdiag_max = 0.0;           // off-block mass of dense Hcal^{-1}
  double hinv_minus_dinv_max = 0.0;   // ||H^{-1} - D^{-1}||_max
  double wv_max_abs = 0.0;            // max |w v| (exact zero expected)
  int rank_v = 0;                     // numeric rank of the full constraints
};

// Appendix algebra checks for the balanced symmetric case I = J = T = N: the
// linear-model Hessian Hcal = (w'w + vv')/sqrt(NT) has a block-diagonal
// inverse whose first block is
//   A^{-1} = I - (I_N (x) 1 1' + 1 1' (x) I_T) / (2 sqrt(NT)) + 1 1' / (3 NT),
// obtained by a Sherman-Morrison step inside a Woodbury update.
inline LemmaReport verify_hessian_lemmas(const OracleModel& m, const Panel& panel,
                                         const Eigen::VectorXd& beta,
                                         const Eigen::VectorXd& phi) {
  const int I = panel.I(), J = panel.J(), T = panel.T();
  if (I != J || I != T)
    throw AsymmetricPanel("hessian lemma checks require I = J = T");
  if (!panel.balanced())
    throw AsymmetricPanel("hessian lemma checks require a balanced panel");
  const int N = I;
  const int P = m.dim();
  const double s = std::sqrt(static_cast<double>(N) * T);

  LemmaReport rep;
  rep.wv_max_abs = (m.w * m.v).cwiseAbs().maxCoeff();
  rep.rank_v = static_cast<int>(
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(build_constraints(I, J, T)).rank());

  // (a) smallest eigenvalue of the penalized Hessian at the given parameters.
  Eigen::VectorXd eta_vec = oracle_eta(m, panel, beta, phi);
  std::vector<double> eta(eta_vec.data(), eta_vec.data() + panel.n());
  LinkEval link = logistic_link(std::move(eta));
  Eigen::VectorXd d1(panel.n());
  for (std::int64_t o = 0; o < panel.n(); ++o) d1(o) = link.d1[static_cast<std::size_t>(o)];
  Eigen::MatrixXd H =
      (m.w.transpose() * d1.asDiagonal() * m.w + m.c1 * (m.v * m.v.transpose())) / s;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  rep.lambda_min = es.eigenvalues().minCoeff();
  rep.c_min = d1.minCoeff();
  rep.bound_margin = rep.lambda_min - (3.0 / 7.0) * rep.c_min;

  // (b) closed-form first block of Hcal^{-1} against a dense inverse.
  Eigen::MatrixXd hcal = (m.w.transpose() * m.w + m.v * m.v.transpose()) / s;
  Eigen::MatrixXd hcal_inv = hcal.inverse();
  const int pa = m.p_alpha;
  Eigen::MatrixXd a_inv_num = hcal.topLeftCorner(pa, pa).inverse();
  Eigen::MatrixXd a_inv_closed(pa, pa);
  for (int r = 0; r < pa; ++r) {
    const int i = r / T, t = r % T;
    for (int c = 0; c < pa; ++c) {
      const int i2 = c / T, t2 = c % T;
      double val = (i == i2 && t == t2) ? 1.0 : 0.0;
      val -= (((i == i2) ? 1.0 : 0.0) + ((t == t2) ? 1.0 : 0.0)) / (2.0 * s);
      val += 1.0 / (3.0 * N * T);
      a_inv_closed(r, c) = val;
    }
  }
  rep.block_inverse_max_err = (a_inv_closed - a_inv_num).cwiseAbs().maxCoeff();

  // Off-block entries of the dense inverse vanish: F^{-1} P = 0 and
  // C^{-1} B = 0 in the appendix block elimination.
  double off = 0.0;
  const int off_g = m.p_alpha, off_r = m.p_alpha + m.p_gamma;
  for (int r = 0; r < P; ++r)
    for (int c = 0; c < P; ++c) {
      const int br = (r < off_g) ? 0 : (r < off_r ? 1 : 2);
      const int bc = (c < off_g) ? 0 : (c < off_r ? 1 : 2);
      if (br != bc) off = std::max(off, std::abs(hcal_inv(r, c)));
    }
  rep.offdiag_max = off;

  // (c) distance between H^{-1} and the inverse of its diagonal part.
  Eigen::VectorXd diag = (m.w.transpose() * d1.asDiagonal() * m.w).diagonal() / s;
  Eigen::MatrixXd h_inv = H.inverse();
  Eigen::MatrixXd d_inv = diag.cwiseInverse().asDiagonal();
  rep.hinv_minus_dinv_max = (h_inv - d_inv).cwiseAbs().maxCoeff();
  return rep;
}

// Balanced N x N x T grid with alternating outcomes; the lemma checks only
// need the index structure, not the outcomes.
inline Panel synthetic_grid_panel(int N, int T) {
  std::vector<std::string> ilab, jlab, tlab;
  for (int i = 0; i < N; ++i) ilab.push_back(std::to_string(i + 1));
  jlab = ilab;
  for (int t = 0; t < T; ++t) tlab.push_back(std::to_string(t + 1));
  std::vector<std::int32_t> i_of, j_of, t_of;
  std::vector<double> y, x;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      for (int t = 0; t < T; ++t) {
        i_of.push_back(i);
        j_of.push_back(j);
        t_of.push_back(t);
        y.push_back(static_cast<double>((i + j + t) % 2));
        x.push_back(std::cos(static_cast<double>(i * 31 + j * 7 + t)));
      }
  return Panel::from_indexed(std::move(ilab), std::move(jlab), std::move(tlab),
                             std::move(i_of), std::move(j_of), std::move(t_of),
                             std::move(y), {std::move(x)}, {"x"});
}

}  // namespace trilogit
