#pragma once

#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "trilogit/debias.hpp"
#include "trilogit/glm.hpp"
#include "trilogit/panel.hpp"
#include "trilogit/rng.hpp"

namespace trilogit {

// Static three-way logit DGP: a single AR(1)-style regressor loaded on all
// three effects, logistic errors drawn by inverse CDF of a uniform.
struct DgpConfig {
  int N = 50;
  int T = 10;
  double beta0 = 1.0;
  std::uint64_t seed = 0;
  double effect_var = 1.0 / 24.0;
  double v_var = 0.5;
  double ar = 0.5;
  double x0_var = 1.0;
  bool include_diagonal = true;  // i == j cells are part of the design
  bool effects_off = false;      // diagnostic switch: zero effects
};

namespace mcdetail {
enum Tag : std::uint64_t { alpha = 1, gamma = 2, rho = 3, x0 = 4, vshock = 5, uerr = 6 };
}

inline Panel generate(const DgpConfig& cfg, int rep_index) {
  const int N = cfg.N, T = cfg.T;
  if (N < 2 || T < 2) throw std::invalid_argument("DGP requires N >= 2 and T >= 2");
  if (!(cfg.effect_var > 0.0) || !(cfg.v_var > 0.0) || !(cfg.x0_var > 0.0))
    throw std::invalid_argument("DGP variances must be positive");
  const auto rep = static_cast<std::uint64_t>(rep_index);
  const double effect_sd = cfg.effects_off ? 0.0 : std::sqrt(cfg.effect_var);

  // Each variable draws from its own substream in a fixed order, so the
  // panel is a pure function of (seed, rep_index).
  std::vector<double> a(static_cast<std::size_t>(N) * T);
  std::vector<double> g(static_cast<std::size_t>(N) * T);
  std::vector<double> r(static_cast<std::size_t>(N) * N);
  {
    RngStream sa(cfg.seed, rep, mcdetail::alpha);
    for (auto& z : a) z = sa.normal(effect_sd);
    RngStream sg(cfg.seed, rep, mcdetail::gamma);
    for (auto& z : g) z = sg.normal(effect_sd);
    RngStream sr(cfg.seed, rep, mcdetail::rho);
    for (auto& z : r) z = sr.normal(effect_sd);
  }
  RngStream sx0(cfg.seed, rep, mcdetail::x0);
  RngStream sv(cfg.seed, rep, mcdetail::vshock);
  RngStream su(cfg.seed, rep, mcdetail::uerr);
  const double x0_sd = std::sqrt(cfg.x0_var);
  const double v_sd = std::sqrt(cfg.v_var);

  std::vector<std::string> labels(static_cast<std::size_t>(std::max(N, T)));
  for (std::size_t v = 0; v < labels.size(); ++v) labels[v] = std::to_string(v + 1);
  std::vector<std::string> ilab(labels.begin(), labels.begin() + N);
  std::vector<std::string> jlab(labels.begin(), labels.begin() + N);
  std::vector<std::string> tlab(labels.begin(), labels.begin() + T);

  const auto cap = static_cast<std::size_t>(N) * N * T;
  std::vector<std::int32_t> i_of, j_of, t_of;
  std::vector<double> y, x;
  i_of.reserve(cap); j_of.reserve(cap); t_of.reserve(cap);
  y.reserve(cap); x.reserve(cap);

  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      const bool skip = (!cfg.include_diagonal && i == j);
      double xt = sx0.normal(x0_sd);
      for (int t = 0; t < T; ++t) {
        const double eff = a[static_cast<std::size_t>(i) * T + t] +
                           g[static_cast<std::size_t>(j) * T + t] +
                           r[static_cast<std::size_t>(i) * N + j];
        xt = cfg.ar * xt + eff + sv.normal(v_sd);
        const double eps = su.logistic();
        if (skip) continue;
        i_of.push_back(i);
        j_of.push_back(j);
        t_of.push_back(t);
        x.push_back(xt);
        y.push_back(cfg.beta0 * xt + eff >= eps ? 1.0 : 0.0);
      }
    }
  }
  return Panel::from_indexed(std::move(ilab), std::move(jlab), std::move(tlab),
                             std::move(i_of), std::move(j_of), std::move(t_of),
                             std::move(y), {std::move(x)}, {"x"});
}

struct RepRecord {
  int rep = 0;
  bool ok = false;
  std::string error;
  double beta_unc = std::numeric_limits<double>::quiet_NaN();
  double beta_deb = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  std::int64_t n_used = 0;
  std::int64_t dropped = 0;
};

struct StudyOptions {
  FitOptions fit;
  int threads = 1;
};

// Runs all replications of one (N, T) cell. Replications are independent;
// with threads > 1 they are claimed from a shared counter and written into
// rep-indexed slots, so the result does not depend on scheduling.
inline std::vector<RepRecord> run_cell(const DgpConfig& cfg, int reps,
                                       const StudyOptions& opts = {}) {
  std::vector<RepRecord> records(static_cast<std::size_t>(reps));
  auto one = [&](int rep) {
    RepRecord rec;
    rec.rep = rep;
    try {
      Panel raw = generate(cfg, rep);
      auto [panel, report] = drop_uninformative(raw);
      rec.dropped = report.dropped_observation_count;
      rec.n_used = panel.n();
      FitResult fit = fit_mle(panel, opts.fit);
      CorrectedFit cf = correct_fit(panel, fit);
      rec.beta_unc = cf.beta_uncorrected(0);
      rec.beta_deb = cf.beta_debiased(0);
      rec.se = cf.se(0);
      rec.ok = true;
    } catch (const DataError& e) {
      rec.error = e.what();
    } catch (const EstimationError& e) {
      rec.error = e.what();
    }
    return rec;
  };
  if (opts.threads <= 1) {
    for (int rep = 0; rep < reps; ++rep) records[static_cast<std::size_t>(rep)] = one(rep);
  } else {
    std::atomic<int> next{0};
    auto worker = [&] {
      for (;;) {
        const int rep = next.fetch_add(1);
        if (rep >= reps) break;
        records[static_cast<std::size_t>(rep)] = one(rep);
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < opts.threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return records;
}

struct EstimatorSummary {
  double rel_bias_pct = std::numeric_limits<double>::quiet_NaN();
  double bias_sd = std::numeric_limits<double>::quiet_NaN();
  double coverage = std::numeric_limits<double>::quiet_NaN();
  double mean_se = std::numeric_limits<double>::quiet_NaN();
  double sd = std::numeric_limits<double>::quiet_NaN();
  bool sd_defined = false;
};

struct McSummary {
  int N = 0, T = 0;
  int reps_requested = 0, reps_used = 0, failures = 0;
  EstimatorSummary uncorrected, debiased;
};

inline constexpr double kZ975 = 1.959964;

namespace mcdetail {

inline EstimatorSummary summarize_estimator(const std::vector<RepRecord>& recs,
                                            bool debiased, double beta0) {
  EstimatorSummary s;
  std::vector<double> betas;
  double cover = 0.0, se_sum = 0.0;
  for (const auto& r : recs) {
    if (!r.ok) continue;
    const double b = debiased ? r.beta_deb : r.beta_unc;
    betas.push_back(b);
    se_sum += r.se;
    if (std::abs(b - beta0) <= kZ975 * r.se) cover += 1.0;
  }
  const auto used = static_cast<double>(betas.size());
  if (betas.empty()) return s;
  double mean = 0.0;
  for (double b : betas) mean += b;
  mean /= used;
  s.rel_bias_pct = 100.0 * (mean - beta0) / beta0;
  s.coverage = cover / used;
  s.mean_se = se_sum / used;
  if (betas.size() >= 2) {
    double ss = 0.0;
    for (double b : betas) ss += (b - mean) * (b - mean);
    s.sd = std::sqrt(ss / (used - 1.0));
    s.bias_sd = (mean - beta0) / s.sd;
    s.sd_defined = true;
  }
  return s;
}

}  // namespace mcdetail

inline McSummary summarize(const DgpConfig& cfg, int reps,
                           const std::vector<RepRecord>& records) {
  McSummary s;
  s.N = cfg.N;
  s.T = cfg.T;
  s.reps_requested = reps;
  for (const auto& r : records) s.reps_used += r.ok ? 1 : 0;
  s.failures = reps - s.reps_used;
  s.uncorrected = mcdetail::summarize_estimator(records, false, cfg.beta0);
  s.debiased = mcdetail::summarize_estimator(records, true, cfg.beta0);
  return s;
}

inline std::vector<McSummary> run_study(const std::vector<std::pair<int, int>>& grid,
                                        int reps, std::uint64_t seed,
                                        const StudyOptions& opts = {},
                                        double beta0 = 1.0) {
  std::vector<McSummary> out;
  for (auto [N, T] : grid) {
    DgpConfig cfg;
    cfg.N = N;
    cfg.T = T;
    cfg.seed = seed;
    cfg.beta0 = beta0;
    out.push_back(summarize(cfg, reps, run_cell(cfg, reps, opts)));
  }
  return out;
}

// Plot-ready normalized differences N*sqrt(T)(b - b0) and sqrt(NT)(b - b0).
struct NormDiffRecord {
  int N = 0, T = 0, rep = 0;
  double unc_a = 0.0, unc_b = 0.0;
  double deb_a = 0.0, deb_b = 0.0;
};

inline std::vector<NormDiffRecord> normalized_differences_from(
    const DgpConfig& cfg, const std::vector<RepRecord>& records) {
  const double sa = cfg.N * std::sqrt(static_cast<double>(cfg.T));
  const double sb = std::sqrt(static_cast<double>(cfg.N) * cfg.T);
  std::vector<NormDiffRecord> out;
  for (const auto& r : records) {
    if (!r.ok) continue;
    NormDiffRecord d;
    d.N = cfg.N;
    d.T = cfg.T;
    d.rep = r.rep;
    d.unc_a = sa * (r.beta_unc - cfg.beta0);
    d.unc_b = sb * (r.beta_unc - cfg.beta0);
    d.deb_a = sa * (r.beta_deb - cfg.beta0);
    d.deb_b = sb * (r.beta_deb - cfg.beta0);
    out.push_back(d);
  }
  return out;
}

inline std::vector<NormDiffRecord> normalized_differences(const DgpConfig& cfg,
                                                          int reps,
                                                          const StudyOptions& opts = {}) {
  return normalized_differences_from(cfg, run_cell(cfg, reps, opts));
}

}  // namespace trilogit
