// Command-line front end: estimate on CSV data, run simulation studies, run
// the dense verification checks. All numeric work lives in the headers; this
// file only parses flags, routes data and formats output.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 estimation error,
// 4 verification failure.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "trilogit/csv.hpp"
#include "trilogit/debias.hpp"
#include "trilogit/glm.hpp"
#include "trilogit/montecarlo.hpp"
#include "trilogit/oracle.hpp"
#include "trilogit/serialize.hpp"

using namespace trilogit;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitEstimation = 3;
constexpr int kExitVerification = 4;

std::vector<std::pair<int, int>> parse_grid(const std::string& spec) {
  std::vector<std::pair<int, int>> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto x = item.find('x');
    if (x == std::string::npos)
      throw CLI::ValidationError("--grid/--sizes", "expected AxB pairs: " + item);
    const int a = std::stoi(item.substr(0, x));
    const int b = std::stoi(item.substr(x + 1));
    if (a < 2 || b < 2)
      throw CLI::ValidationError("--grid/--sizes", "dimensions must be >= 2");
    out.emplace_back(a, b);
  }
  if (out.empty()) throw CLI::ValidationError("--grid/--sizes", "empty list");
  return out;
}

std::ostream& open_output(const std::string& path, std::ofstream& file) {
  if (path.empty()) return std::cout;
  file.open(path);
  if (!file) throw DataError("cannot open output file: " + path);
  return file;
}

void print_table2(std::ostream& os, const CorrectedFit& cf, bool corrected) {
  auto row = [&](const char* name, const Eigen::VectorXd& unc,
                 const Eigen::VectorXd* deb) {
    os << "  " << name;
    for (std::size_t pad = std::string(name).size(); pad < 12; ++pad) os << ' ';
    char buf[32];
    for (Eigen::Index k = 0; k < unc.size(); ++k) {
      std::snprintf(buf, sizeof(buf), " %10.3f", unc(k));
      os << buf;
    }
    if (deb != nullptr) {
      os << "  |";
      for (Eigen::Index k = 0; k < deb->size(); ++k) {
        std::snprintf(buf, sizeof(buf), " %10.3f", (*deb)(k));
        os << buf;
      }
    }
    os << '\n';
  };
  if (corrected) os << "              (uncorrected | debiased)\n";
  os << "              ";
  for (const auto& name : cf.names) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), " %10s", name.c_str());
    os << buf;
  }
  if (corrected) {
    os << "  |";
    for (const auto& name : cf.names) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), " %10s", name.c_str());
      os << buf;
    }
  }
  os << '\n';
  os << "A: Model parameters\n";
  row("estimate", cf.beta_uncorrected, corrected ? &cf.beta_debiased : nullptr);
  row("std. err.", cf.se, corrected ? &cf.se : nullptr);
  row("z", cf.z_uncorrected, corrected ? &cf.z : nullptr);
  os << "B: Odds ratios\n";
  row("estimate", cf.odds_uncorrected.odds_ratio,
      corrected ? &cf.odds_debiased.odds_ratio : nullptr);
  row("std. err.", cf.odds_uncorrected.se, corrected ? &cf.odds_debiased.se : nullptr);
  row("z", cf.odds_uncorrected.z, corrected ? &cf.odds_debiased.z : nullptr);
}

void write_estimate_csv(std::ostream& os, const CorrectedFit& cf, bool corrected) {
  os << "term,beta_uncorrected,se,z_uncorrected,or_uncorrected,or_se_uncorrected,"
        "or_z_uncorrected";
  if (corrected) os << ",beta_debiased,z,odds_ratio,or_se,or_z";
  os << '\n';
  for (std::size_t k = 0; k < cf.names.size(); ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    os << cf.names[k] << ',' << num(cf.beta_uncorrected(ki)) << ',' << num(cf.se(ki))
       << ',' << num(cf.z_uncorrected(ki)) << ',' << num(cf.odds_uncorrected.odds_ratio(ki))
       << ',' << num(cf.odds_uncorrected.se(ki)) << ',' << num(cf.odds_uncorrected.z(ki));
    if (corrected)
      os << ',' << num(cf.beta_debiased(ki)) << ',' << num(cf.z(ki)) << ','
         << num(cf.odds_debiased.odds_ratio(ki)) << ',' << num(cf.odds_debiased.se(ki))
         << ',' << num(cf.odds_debiased.z(ki));
    os << '\n';
  }
}

void write_estimate_kv(std::ostream& os, const CorrectedFit& cf, bool corrected) {
  if (corrected) {
    write_corrected_fit(os, cf);
    return;
  }
  kv::line(os, "regressors", cf.names);
  kv::line(os, "beta_uncorrected", cf.beta_uncorrected);
  kv::line(os, "se", cf.se);
  kv::line(os, "z_uncorrected", cf.z_uncorrected);
  kv::line(os, "odds_ratio_uncorrected", cf.odds_uncorrected.odds_ratio);
  kv::line(os, "or_se_uncorrected", cf.odds_uncorrected.se);
  kv::line(os, "or_z_uncorrected", cf.odds_uncorrected.z);
  kv::line(os, "I", std::to_string(cf.dims.I));
  kv::line(os, "J", std::to_string(cf.dims.J));
  kv::line(os, "T", std::to_string(cf.dims.T));
  kv::line(os, "n", std::to_string(cf.dims.n));
}

int cmd_estimate(const std::string& input, const ColumnSchema& schema,
                 bool bias_correction, const FitOptions& fit_opts,
                 const std::string& output, const std::string& format) {
  Panel raw;
  Panel panel;
  DropReport report;
  try {
    raw = build_panel(read_csv_file(input, schema), schema.x);
    std::tie(panel, report) = drop_uninformative(raw);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }

  CorrectedFit cf;
  FitResult fit;
  try {
    fit = fit_mle(panel, fit_opts);
    ProjectionResiduals pr =
        projection_residuals(panel, fit.link, fit_opts.inner_tol, fit_opts.max_sweeps);
    BiasComponents bc = bias_components(panel, fit.link, pr);
    cf = debias(fit, bc, dims_of(panel), panel.regressor_names());
    odds_ratios(cf);
  } catch (const EstimationError& e) {
    std::cerr << "estimation error: " << e.what() << '\n';
    return kExitEstimation;
  }

  std::ofstream file;
  std::ostream& os = open_output(output, file);
  if (format == "kv") {
    write_estimate_kv(os, cf, bias_correction);
  } else if (format == "csv") {
    write_estimate_csv(os, cf, bias_correction);
  } else {
    os << "observations " << raw.n() << " -> " << panel.n() << " after pruning ("
       << report.dropped_observation_count << " dropped, " << report.rounds
       << " rounds)\n";
    os << "I=" << panel.I() << " J=" << panel.J() << " T=" << panel.T()
       << " K=" << panel.K() << "\n";
    char dev[32];
    std::snprintf(dev, sizeof(dev), "%.6g", fit.deviance);
    os << "fit: deviance=" << dev << ", " << fit.iterations
       << " iterations, converged=" << (fit.converged ? "yes" : "no") << "\n\n";
    print_table2(os, cf, bias_correction);
  }
  return 0;
}

int cmd_simulate(const std::string& grid_spec, int reps, std::uint64_t seed,
                 int threads, const FitOptions& fit_opts, const std::string& output,
                 bool figure2, const std::string& sizes_spec,
                 const std::string& format) {
  StudyOptions opts;
  opts.fit = fit_opts;
  opts.threads = threads;
  std::ofstream file;
  std::ostream& os = open_output(output, file);

  if (figure2) {
    const auto sizes = parse_grid(sizes_spec.empty() ? grid_spec : sizes_spec);
    std::vector<NormDiffRecord> all;
    for (auto [N, T] : sizes) {
      DgpConfig cfg;
      cfg.N = N;
      cfg.T = T;
      cfg.seed = seed;
      auto recs = normalized_differences(cfg, reps, opts);
      all.insert(all.end(), recs.begin(), recs.end());
    }
    write_normdiff_csv(os, all);
    return 0;
  }

  const auto grid = parse_grid(grid_spec);
  const auto summaries = run_study(grid, reps, seed, opts);
  if (format == "kv")
    write_study_kv(os, summaries);
  else
    write_study_csv(os, summaries);

  std::ostream& tbl = (&os == &std::cout) ? std::cerr : std::cout;
  tbl << "(N, T)      |        uncorrected        |         debiased\n";
  tbl << "            |  bias%  bias/sd coverage  |  bias%  bias/sd coverage\n";
  char buf[160];
  for (const auto& s : summaries) {
    std::snprintf(buf, sizeof(buf),
                  "(%3d, %3d)  | %7.3f %7.3f   %5.3f   | %7.3f %7.3f   %5.3f",
                  s.N, s.T, s.uncorrected.rel_bias_pct, s.uncorrected.bias_sd,
                  s.uncorrected.coverage, s.debiased.rel_bias_pct, s.debiased.bias_sd,
                  s.debiased.coverage);
    tbl << buf << "  (reps used " << s.reps_used << ", failures " << s.failures
        << ")\n";
  }
  return 0;
}

struct VerifyCheck {
  std::string name;
  bool pass;
  std::string detail;
};

int cmd_verify(const std::string& sizes_spec, std::uint64_t seed,
               const FitOptions& fit_opts, const std::string& output) {
  std::vector<VerifyCheck> checks;
  auto add = [&](const std::string& name, bool pass, const std::string& detail) {
    checks.push_back({name, pass, detail});
  };

  std::vector<std::pair<int, int>> sizes;
  try {
    sizes = parse_grid(sizes_spec);
    for (auto [N, T] : sizes)
      if (N != T)
        throw AsymmetricPanel("lemma checks require N = T, got " +
                              std::to_string(N) + "x" + std::to_string(T));
  } catch (const AsymmetricPanel& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  std::ofstream file;
  std::ostream& os = open_output(output, file);

  double hd_first = 0.0, hd_last = 0.0;
  for (std::size_t si = 0; si < sizes.size(); ++si) {
    const int N = sizes[si].first;
    Panel panel = synthetic_grid_panel(N, N);
    OracleModel model = build_oracle_model(panel);
    const std::string tag = "N=T=" + std::to_string(N) + " ";

    // Random logistic parameterizations; the first also feeds the report.
    double lmin_all = 1e300;
    LemmaReport rep;
    for (int draw = 0; draw < 20; ++draw) {
      RngStream rng(seed, static_cast<std::uint64_t>(si), 100 + static_cast<std::uint64_t>(draw));
      Eigen::VectorXd beta(1);
      beta << rng.normal(0.5);
      Eigen::VectorXd phi(model.dim());
      for (int g = 0; g < model.dim(); ++g) phi(g) = rng.normal(0.3);
      LemmaReport r = verify_hessian_lemmas(model, panel, beta, phi);
      lmin_all = std::min(lmin_all, r.lambda_min);
      if (draw == 0) rep = r;
    }
    {
      // Trend statistic at the zero parameterization, comparable across sizes.
      Eigen::VectorXd beta0 = Eigen::VectorXd::Zero(1);
      Eigen::VectorXd phi0 = Eigen::VectorXd::Zero(model.dim());
      LemmaReport r0 = verify_hessian_lemmas(model, panel, beta0, phi0);
      if (si == 0) hd_first = r0.hinv_minus_dinv_max;
      if (si + 1 == sizes.size()) hd_last = r0.hinv_minus_dinv_max;
      rep.hinv_minus_dinv_max = r0.hinv_minus_dinv_max;
    }
    os << "# lemma report " << tag << '\n';
    write_lemma_report(os, rep);
    add(tag + "w.v = 0", rep.wv_max_abs == 0.0, "max |w v| = " + num(rep.wv_max_abs));
    add(tag + "rank(v) = T+I+J-1", rep.rank_v == 3 * N - 1,
        "rank " + std::to_string(rep.rank_v));
    add(tag + "closed-form block inverse", rep.block_inverse_max_err < 1e-10,
        "max err " + num(rep.block_inverse_max_err));
    add(tag + "inverse block diagonal", rep.offdiag_max < 1e-10,
        "off-block max " + num(rep.offdiag_max));
    add(tag + "lambda_min > 0 (20 draws)", lmin_all > 0.0, "min " + num(lmin_all));
  }
  if (sizes.size() >= 2)
    add("||H^-1 - D^-1|| decreasing across sizes", hd_last < hd_first,
        num(hd_first) + " -> " + num(hd_last));

  // Dense-vs-fast equivalence on a seeded DGP instance, plus c1 invariance.
  {
    DgpConfig cfg;
    cfg.N = 6;
    cfg.T = 4;
    cfg.seed = seed;
    bool equiv = false, c1inv = false;
    std::string detail = "estimation failed";
    try {
      Panel raw = generate(cfg, 0);
      auto [panel, rep] = drop_uninformative(raw);
      FitResult fast = fit_mle(panel, fit_opts);
      OracleModel model = build_oracle_model(panel);
      OracleFit dense = fit_penalized_newton(model, panel);
      Eigen::VectorXd eta = oracle_eta(model, panel, dense.beta, dense.phi);
      double mu_diff = 0.0;
      for (std::int64_t o = 0; o < panel.n(); ++o) {
        const double mu_dense = 1.0 / (1.0 + std::exp(-eta(o)));
        mu_diff = std::max(mu_diff,
                           std::abs(mu_dense - fast.link.mu[static_cast<std::size_t>(o)]));
      }
      const double beta_diff = (fast.beta - dense.beta).lpNorm<Eigen::Infinity>();

      ProjectionResiduals prx = projection_residuals(panel, fast.link);
      BiasComponents bc = bias_components(panel, fast.link, prx);
      CorrectedFit cf = debias(fast, bc, dims_of(panel), panel.regressor_names());
      const int K = panel.K();
      Eigen::MatrixXd hinv =
          (model.scale * dense.hessian).inverse().topLeftCorner(K, K);
      double se_rel = 0.0;
      for (int k = 0; k < K; ++k) {
        const double se_dense = std::sqrt(hinv(k, k));
        se_rel = std::max(se_rel, std::abs(se_dense - cf.se(k)) / se_dense);
      }
      equiv = beta_diff < 1e-6 && mu_diff < 1e-6 && se_rel < 1e-6;
      detail = "beta diff " + num(beta_diff) + ", mu diff " + num(mu_diff) +
               ", se rel diff " + num(se_rel);

      OracleModel model2 = build_oracle_model(panel, 2.0);
      OracleFit dense2 = fit_penalized_newton(model2, panel);
      const double b_change = (dense.beta - dense2.beta).lpNorm<Eigen::Infinity>();
      const double p_change = (dense.phi - dense2.phi).lpNorm<Eigen::Infinity>();
      c1inv = b_change < 1e-8 && p_change < 1e-8;
      add("c1 doubling leaves estimates unchanged", c1inv,
          "beta " + num(b_change) + ", phi " + num(p_change));
    } catch (const std::exception& e) {
      detail = std::string("estimation failed: ") + e.what();
    }
    add("dense-vs-fast equivalence", equiv, detail);
  }

  bool all = true;
  for (const auto& c : checks) {
    os << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << " (" << c.detail << ")\n";
    all = all && c.pass;
  }
  if (!all) {
    std::cerr << "verification failed:\n";
    for (const auto& c : checks)
      if (!c.pass) std::cerr << "  " << c.name << ": " << c.detail << '\n';
    return kExitVerification;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"three-way fixed-effects logit estimation with analytic bias correction"};
  app.require_subcommand(1);

  FitOptions fit_opts;
  std::string output, format = "text";

  // estimate
  auto* est = app.add_subcommand("estimate", "fit a CSV panel and report debiased results");
  std::string input;
  ColumnSchema schema;
  std::string xcols;
  bool no_bias_correction = false;
  est->add_option("--input", input, "CSV file with header row")->required();
  est->add_option("--i", schema.i, "sender id column")->required();
  est->add_option("--j", schema.j, "receiver id column")->required();
  est->add_option("--t", schema.t, "period column")->required();
  est->add_option("--y", schema.y, "binary outcome column")->required();
  est->add_option("--x", xcols, "comma-separated regressor columns")->required();
  est->add_flag("--no-bias-correction", no_bias_correction,
                "report the uncorrected estimator only");
  est->add_option("--outer-tol", fit_opts.outer_tol, "relative deviance tolerance")->check(CLI::PositiveNumber);
  est->add_option("--inner-tol", fit_opts.inner_tol, "projection sweep tolerance")->check(CLI::PositiveNumber);
  est->add_option("--output", output, "write results to this file");
  est->add_option("--format", format, "text, csv or kv")
      ->check(CLI::IsMember({"text", "csv", "kv"}));

  // simulate
  auto* sim = app.add_subcommand("simulate", "run seeded replication studies");
  std::string grid = "50x10", sizes;
  int reps = 500, threads = 1;
  std::uint64_t seed = 0;
  bool seed_set = false, figure2 = false;
  sim->add_option("--grid", grid, "grid cells AxB[,CxD...]");
  sim->add_option("--reps", reps, "replications per cell")->check(CLI::PositiveNumber);
  sim->add_option("--seed", seed, "study seed (required)")
      ->each([&](const std::string&) { seed_set = true; });
  sim->add_option("--threads", threads, "parallel replication workers")
      ->check(CLI::PositiveNumber);
  sim->add_flag("--figure2", figure2, "emit normalized-difference records");
  sim->add_option("--sizes", sizes, "sizes for --figure2, AxB[,CxD...]");
  sim->add_option("--outer-tol", fit_opts.outer_tol, "relative deviance tolerance")->check(CLI::PositiveNumber);
  sim->add_option("--inner-tol", fit_opts.inner_tol, "projection sweep tolerance")->check(CLI::PositiveNumber);
  sim->add_option("--output", output, "write the table to this file");
  std::string sim_format = "csv";
  sim->add_option("--format", sim_format, "csv or kv summary")
      ->check(CLI::IsMember({"csv", "kv"}));

  // verify
  auto* ver = app.add_subcommand("verify", "dense oracle cross-checks");
  std::string vsizes = "4x4,5x5";
  std::uint64_t vseed = 1;
  ver->add_option("--sizes", vsizes, "balanced sizes NxN[,MxM...]");
  ver->add_option("--seed", vseed, "seed for random parameterizations");
  ver->add_option("--outer-tol", fit_opts.outer_tol, "fast-path deviance tolerance")->check(CLI::PositiveNumber);
  ver->add_option("--inner-tol", fit_opts.inner_tol, "fast-path sweep tolerance")->check(CLI::PositiveNumber);
  ver->add_option("--output", output, "write the report to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.get_name() << ": " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (est->parsed()) {
      std::stringstream xs(xcols);
      std::string col;
      while (std::getline(xs, col, ',')) schema.x.push_back(col);
      if (schema.x.empty()) {
        std::cerr << "usage error: --x must name at least one column\n";
        return kExitUsage;
      }
      return cmd_estimate(input, schema, !no_bias_correction, fit_opts, output, format);
    }
    if (sim->parsed()) {
      if (!seed_set) {
        std::cerr << "usage error: simulate requires --seed (no ambient entropy)\n";
        return kExitUsage;
      }
      return cmd_simulate(grid, reps, seed, threads, fit_opts, output, figure2,
                          sizes, sim_format);
    }
    return cmd_verify(vsizes, vseed, fit_opts, output);
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const EstimationError& e) {
    std::cerr << "estimation error: " << e.what() << '\n';
    return kExitEstimation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitVerification;
  }
}
