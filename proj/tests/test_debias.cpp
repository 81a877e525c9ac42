#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "trilogit/debias.hpp"
#include "trilogit/glm.hpp"
#include "trilogit/montecarlo.hpp"
#include "trilogit/oracle.hpp"

using namespace trilogit;

namespace {

Panel clean_instance(std::uint64_t seed, int N = 6, int T = 4) {
  DgpConfig cfg;
  cfg.N = N;
  cfg.T = T;
  cfg.seed = seed;
  return drop_uninformative(generate(cfg, 0)).first;
}

// Bias components transcribed directly from their displayed sums: explicit
// nested loops over index pairs, membership found by scanning observations.
// Shares no code with the implementation path.
struct LoopBias {
  double b_alpha, b_gamma, b_rho;
  double w_hat;
};

LoopBias loop_bias(const Panel& p, const LinkEval& link,
                   const std::vector<double>& xt) {
  const auto n = static_cast<std::size_t>(p.n());
  auto ratio_sum = [&](int dim_a, int dim_b, auto in_cell) {
    double total = 0.0;
    int cells = 0;
    for (int a = 0; a < dim_a; ++a)
      for (int b = 0; b < dim_b; ++b) {
        double num = 0.0, den = 0.0;
        bool any = false;
        for (std::size_t o = 0; o < n; ++o) {
          if (!in_cell(o, a, b)) continue;
          any = true;
          num += link.d2[o] * xt[o];
          den += link.d1[o];
        }
        if (!any) continue;
        total += num / den;
        ++cells;
      }
    return -0.5 * total / static_cast<double>(cells);
  };
  LoopBias lb{};
  lb.b_alpha = ratio_sum(p.I(), p.T(), [&](std::size_t o, int a, int b) {
    return p.i_of()[o] == a && p.t_of()[o] == b;
  });
  lb.b_gamma = ratio_sum(p.J(), p.T(), [&](std::size_t o, int a, int b) {
    return p.j_of()[o] == a && p.t_of()[o] == b;
  });
  lb.b_rho = ratio_sum(p.I(), p.J(), [&](std::size_t o, int a, int b) {
    return p.i_of()[o] == a && p.j_of()[o] == b;
  });
  double w = 0.0;
  for (std::size_t o = 0; o < n; ++o) w += link.d1[o] * xt[o] * xt[o];
  lb.w_hat = w / static_cast<double>(p.n());
  return lb;
}

}  // namespace

TEST_CASE("regressors in the dummy span have zero projection residuals") {
  Panel base = clean_instance(25, 5, 3);
  auto rows = base.to_rows();
  std::mt19937 rng(55);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> c(static_cast<std::size_t>(base.I() * base.J()));
  for (auto& v : c) v = d(rng);
  for (auto& r : rows) {
    // rho-pattern regressor: constant within each (i, j) pair
    int i = -1, j = -1;
    for (int a = 0; a < base.I(); ++a)
      if (base.i_labels()[static_cast<std::size_t>(a)] == r.i) i = a;
    for (int b = 0; b < base.J(); ++b)
      if (base.j_labels()[static_cast<std::size_t>(b)] == r.j) j = b;
    r.x = {c[static_cast<std::size_t>(i * base.J() + j)]};
  }
  Panel panel = build_panel(rows, {"x"});
  auto link = logistic_link(std::vector<double>(static_cast<std::size_t>(panel.n()), 0.3));
  ProjectionResiduals pr = projection_residuals(panel, link, 1e-10);
  for (double v : pr.xtilde[0]) REQUIRE(std::abs(v) < 1e-8);
}

TEST_CASE("projection residuals match the dense weighted least-squares oracle") {
  auto panel = testutil::random_panel(3, 3, 2, 61);
  const auto n = static_cast<std::size_t>(panel.n());
  std::mt19937 rng(62);
  std::uniform_real_distribution<double> d(-1.5, 1.5);
  std::vector<double> eta(n);
  for (auto& v : eta) v = d(rng);
  auto link = logistic_link(eta);
  ProjectionResiduals pr = projection_residuals(panel, link, 1e-12, 20000);
  auto dense = testutil::dense_wls_residual(panel, panel.x(0), link.d1, 1e-10);
  for (std::size_t o = 0; o < n; ++o)
    REQUIRE(std::abs(pr.xtilde[0][o] - dense[o]) < 1e-8);
}

TEST_CASE("equal weights reduce to unweighted triple demeaning") {
  auto panel = testutil::random_panel(4, 3, 3, 63);
  const auto n = static_cast<std::size_t>(panel.n());
  auto link = logistic_link(std::vector<double>(n, 0.0));  // d1 = 1/4 everywhere
  ProjectionResiduals pr = projection_residuals(panel, link, 1e-11);
  auto unweighted =
      weighted_triple_demean(panel.x(0), std::vector<double>(n, 1.0), panel, 1e-11, 20000);
  for (std::size_t o = 0; o < n; ++o)
    REQUIRE(std::abs(pr.xtilde[0][o] - unweighted[o]) < 1e-8);
}

TEST_CASE("projection residuals satisfy weighted orthogonality cell by cell") {
  Panel panel = clean_instance(24);
  FitResult fit = fit_mle(panel);
  const double tol = fit.opts.inner_tol;
  ProjectionResiduals pr = projection_residuals(panel, fit.link, tol);
  for (Family f : {Family::it, Family::jt, Family::ij})
    for (const auto& mem : panel.cells(f).members) {
      double sum = 0.0;
      for (auto o : mem)
        sum += fit.link.d1[static_cast<std::size_t>(o)] *
               pr.xtilde[0][static_cast<std::size_t>(o)];
      REQUIRE(std::abs(sum) <= tol * static_cast<double>(mem.size()));
    }
}

TEST_CASE("flat link zeroes the bias components and quarters the Hessian") {
  Panel panel = clean_instance(25);
  const auto n = static_cast<std::size_t>(panel.n());
  auto link = logistic_link(std::vector<double>(n, 0.0));
  ProjectionResiduals pr = projection_residuals(panel, link, 1e-10);
  BiasComponents bc = bias_components(panel, link, pr);
  REQUIRE(bc.b_alpha(0) == 0.0);
  REQUIRE(bc.b_gamma(0) == 0.0);
  REQUIRE(bc.b_rho(0) == 0.0);
  double xx = 0.0;
  for (std::size_t o = 0; o < n; ++o) xx += pr.xtilde[0][o] * pr.xtilde[0][o];
  REQUIRE(bc.w_hat(0, 0) ==
          Catch::Approx(0.25 * xx / static_cast<double>(panel.n())).epsilon(1e-12));
}

TEST_CASE("bias components equal an independent transcription of the sums") {
  for (std::uint64_t seed : {5ull, 8ull, 24ull}) {
    Panel panel = clean_instance(seed);
    FitResult fit = fit_mle(panel);
    ProjectionResiduals pr = projection_residuals(panel, fit.link, 1e-10);
    BiasComponents bc = bias_components(panel, fit.link, pr);
    LoopBias lb = loop_bias(panel, fit.link, pr.xtilde[0]);
    REQUIRE(std::abs(bc.b_alpha(0) - lb.b_alpha) < 1e-12);
    REQUIRE(std::abs(bc.b_gamma(0) - lb.b_gamma) < 1e-12);
    REQUIRE(std::abs(bc.b_rho(0) - lb.b_rho) < 1e-12);
    REQUIRE(std::abs(bc.w_hat(0, 0) - lb.w_hat) < 1e-12);
  }
}

TEST_CASE("negative curvature side makes all bias components non-positive") {
  // mu < 1/2 everywhere gives mu'' > 0; with non-negative residuals the
  // ratios are non-negative and the minus sign makes each component <= 0.
  Panel panel = clean_instance(26);
  const auto n = static_cast<std::size_t>(panel.n());
  auto link = logistic_link(std::vector<double>(n, -0.8));
  ProjectionResiduals pr;
  pr.xtilde.assign(1, std::vector<double>(n));
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (auto& v : pr.xtilde[0]) v = d(rng);
  BiasComponents bc = bias_components(panel, link, pr);
  REQUIRE(bc.b_alpha(0) <= 0.0);
  REQUIRE(bc.b_gamma(0) <= 0.0);
  REQUIRE(bc.b_rho(0) <= 0.0);
}

TEST_CASE("a saturated cell raises DegenerateCell") {
  Panel panel = clean_instance(36);
  const auto n = static_cast<std::size_t>(panel.n());
  LinkEval link = logistic_link(std::vector<double>(n, 0.0));
  for (auto o : panel.it_cells().members[0]) {
    link.d1[static_cast<std::size_t>(o)] = 1e-14;
    link.d2[static_cast<std::size_t>(o)] = 1e-14;
  }
  ProjectionResiduals pr;
  pr.xtilde.assign(1, std::vector<double>(n, 0.5));
  REQUIRE_THROWS_AS(bias_components(panel, link, pr), DegenerateCell);
}

TEST_CASE("debias applies the displayed correction arithmetic") {
  FitResult fit;
  fit.beta = Eigen::VectorXd::Constant(1, 1.0);
  BiasComponents bc;
  bc.b_alpha = Eigen::VectorXd::Constant(1, 0.2);
  bc.b_gamma = Eigen::VectorXd::Constant(1, 0.3);
  bc.b_rho = Eigen::VectorXd::Constant(1, 0.5);
  bc.w_hat = Eigen::MatrixXd::Identity(1, 1);
  PanelDims dims{10, 10, 5, 500};
  CorrectedFit cf = debias(fit, bc, dims, {"x"});
  // 0.2/10 + 0.3/10 + 0.5/5 = 0.15
  REQUIRE(cf.beta_debiased(0) == Catch::Approx(1.0 - 0.15).epsilon(1e-15));
  REQUIRE(cf.se(0) == Catch::Approx(std::sqrt(1.0 / 500.0)).epsilon(1e-15));
  REQUIRE(cf.z(0) == Catch::Approx(0.85 / std::sqrt(1.0 / 500.0)).epsilon(1e-12));
}

TEST_CASE("zero bias components leave the estimate untouched") {
  FitResult fit;
  fit.beta = Eigen::VectorXd::Constant(1, 0.37);
  BiasComponents bc;
  bc.b_alpha = Eigen::VectorXd::Zero(1);
  bc.b_gamma = Eigen::VectorXd::Zero(1);
  bc.b_rho = Eigen::VectorXd::Zero(1);
  bc.w_hat = Eigen::MatrixXd::Constant(1, 1, 2.0);
  CorrectedFit cf = debias(fit, bc, {4, 4, 3, 48}, {"x"});
  REQUIRE(cf.beta_debiased(0) == fit.beta(0));
}

TEST_CASE("forcing a flat link makes the full correction exact identity") {
  Panel panel = clean_instance(40);
  FitResult fit = fit_mle(panel);
  const auto n = static_cast<std::size_t>(panel.n());
  // Evaluate the correction at eta = 0 instead of the converged link.
  LinkEval flat = logistic_link(std::vector<double>(n, 0.0));
  ProjectionResiduals pr = projection_residuals(panel, flat, 1e-10);
  BiasComponents bc = bias_components(panel, flat, pr);
  CorrectedFit cf = debias(fit, bc, dims_of(panel), panel.regressor_names());
  REQUIRE(cf.beta_debiased(0) == fit.beta(0));
}

TEST_CASE("symmetric panels reduce to the displayed N-form of the correction") {
  Panel panel = clean_instance(41);
  REQUIRE(panel.I() == panel.J());
  FitResult fit = fit_mle(panel);
  CorrectedFit cf = correct_fit(panel, fit);
  const double N = panel.I();
  const double correction = (cf.bias.b_alpha(0) / N + cf.bias.b_gamma(0) / N +
                             cf.bias.b_rho(0) / panel.T()) /
                            cf.bias.w_hat(0, 0);
  REQUIRE(cf.beta_debiased(0) ==
          Catch::Approx(fit.beta(0) - correction).epsilon(1e-12));
}

TEST_CASE("singular profile Hessian raises SingularW") {
  FitResult fit;
  fit.beta = Eigen::VectorXd::Zero(2);
  BiasComponents bc;
  bc.b_alpha = Eigen::VectorXd::Zero(2);
  bc.b_gamma = Eigen::VectorXd::Zero(2);
  bc.b_rho = Eigen::VectorXd::Zero(2);
  bc.w_hat = Eigen::MatrixXd::Constant(2, 2, 1.0);  // rank one
  REQUIRE_THROWS_AS(debias(fit, bc, {4, 4, 3, 48}, {"x1", "x2"}), SingularW);
}

TEST_CASE("delta-method odds ratios reproduce the reported trade estimates") {
  CorrectedFit cf;
  cf.names = {"fta"};
  cf.beta_uncorrected = Eigen::VectorXd::Constant(1, 0.360);
  cf.beta_debiased = Eigen::VectorXd::Constant(1, 0.315);
  cf.se = Eigen::VectorXd::Constant(1, 0.053);
  cf.z = cf.beta_debiased.cwiseQuotient(cf.se);
  cf.z_uncorrected = cf.beta_uncorrected.cwiseQuotient(cf.se);
  odds_ratios(cf);
  REQUIRE(cf.odds_uncorrected.odds_ratio(0) == Catch::Approx(1.433).margin(0.002));
  REQUIRE(cf.odds_uncorrected.se(0) == Catch::Approx(0.077).margin(0.002));
  REQUIRE(cf.odds_uncorrected.z(0) ==
          Catch::Approx((std::exp(0.36) - 1.0) / (std::exp(0.36) * 0.053)).epsilon(1e-12));
  REQUIRE(cf.odds_debiased.odds_ratio(0) == Catch::Approx(1.370).margin(0.002));
}

TEST_CASE("null coefficients give unit odds ratios with zero z") {
  OddsRatioSet s = odds_ratio_set(Eigen::VectorXd::Zero(1),
                                  Eigen::VectorXd::Constant(1, 0.1));
  REQUIRE(s.odds_ratio(0) == 1.0);
  REQUIRE(s.z(0) == 0.0);
}

TEST_CASE("standard errors match the dense penalized-Hessian block") {
  for (std::uint64_t seed : {5ull, 37ull}) {
    Panel panel = clean_instance(seed);
    FitResult fit = fit_mle(panel);
    CorrectedFit cf = correct_fit(panel, fit);
    OracleModel model = build_oracle_model(panel);
    OracleFit dense = fit_penalized_newton(model, panel);
    Eigen::MatrixXd hinv = (model.scale * dense.hessian).inverse();
    const double se_dense = std::sqrt(hinv(0, 0));
    REQUIRE(std::abs(se_dense - cf.se(0)) / se_dense < 1e-6);
  }
}

TEST_CASE("the correction shrinks as T grows") {
  double gap_small = 0.0, gap_large = 0.0;
  for (int rep = 0; rep < 3; ++rep) {
    DgpConfig cfg;
    cfg.N = 30;
    cfg.seed = 906;
    cfg.T = 6;
    {
      auto panel = drop_uninformative(generate(cfg, rep)).first;
      FitResult fit = fit_mle(panel);
      CorrectedFit cf = correct_fit(panel, fit);
      gap_small += std::abs(cf.beta_debiased(0) - cf.beta_uncorrected(0));
    }
    cfg.T = 30;
    {
      auto panel = drop_uninformative(generate(cfg, rep)).first;
      FitResult fit = fit_mle(panel);
      CorrectedFit cf = correct_fit(panel, fit);
      gap_large += std::abs(cf.beta_debiased(0) - cf.beta_uncorrected(0));
    }
  }
  REQUIRE(gap_large < gap_small);
}
