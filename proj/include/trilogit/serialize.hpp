#pragma once

#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "trilogit/debias.hpp"
#include "trilogit/glm.hpp"
#include "trilogit/montecarlo.hpp"
#include "trilogit/oracle.hpp"
#include "trilogit/panel.hpp"

namespace trilogit {

// Full-precision, locale-free float formatting; identical inputs produce
// byte-identical text.
inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string num(std::int64_t v) { return std::to_string(v); }
inline std::string num(int v) { return std::to_string(v); }

namespace kv {

inline void line(std::ostream& os, const std::string& key, const std::string& v) {
  os << key << ' ' << v << '\n';
}

inline void line(std::ostream& os, const std::string& key, double v) {
  os << key << ' ' << num(v) << '\n';
}

inline void line(std::ostream& os, const std::string& key, const Eigen::VectorXd& v) {
  os << key;
  for (Eigen::Index k = 0; k < v.size(); ++k) os << ' ' << num(v(k));
  os << '\n';
}

inline void line(std::ostream& os, const std::string& key,
                 const std::vector<std::string>& v) {
  os << key;
  for (const auto& s : v) os << ' ' << s;
  os << '\n';
}

}  // namespace kv

inline void write_panel_summary(std::ostream& os, const Panel& p,
                                const DropReport& report) {
  kv::line(os, "n", std::to_string(p.n()));
  kv::line(os, "I", std::to_string(p.I()));
  kv::line(os, "J", std::to_string(p.J()));
  kv::line(os, "T", std::to_string(p.T()));
  kv::line(os, "K", std::to_string(p.K()));
  kv::line(os, "rounds", std::to_string(report.rounds));
  kv::line(os, "dropped", std::to_string(report.dropped_observation_count));
  for (const auto& c : report.dropped_cells)
    os << "dropped_cell " << family_name(c.family) << ' ' << c.label_a << ' '
       << c.label_b << ' ' << c.reason << '\n';
}

inline void write_fit(std::ostream& os, const FitResult& fit,
                      const std::vector<std::string>& names) {
  kv::line(os, "regressors", names);
  kv::line(os, "beta", fit.beta);
  kv::line(os, "deviance", fit.deviance);
  kv::line(os, "iterations", std::to_string(fit.iterations));
  kv::line(os, "converged", std::string(fit.converged ? "1" : "0"));
  kv::line(os, "clamp_count", std::to_string(fit.clamp_count));
  kv::line(os, "total_sweeps", std::to_string(fit.total_sweeps));
}

inline void write_corrected_fit(std::ostream& os, const CorrectedFit& cf) {
  kv::line(os, "regressors", cf.names);
  kv::line(os, "beta_uncorrected", cf.beta_uncorrected);
  kv::line(os, "beta_debiased", cf.beta_debiased);
  kv::line(os, "se", cf.se);
  kv::line(os, "z", cf.z);
  kv::line(os, "z_uncorrected", cf.z_uncorrected);
  kv::line(os, "odds_ratio", cf.odds_debiased.odds_ratio);
  kv::line(os, "or_se", cf.odds_debiased.se);
  kv::line(os, "or_z", cf.odds_debiased.z);
  kv::line(os, "odds_ratio_uncorrected", cf.odds_uncorrected.odds_ratio);
  kv::line(os, "or_se_uncorrected", cf.odds_uncorrected.se);
  kv::line(os, "or_z_uncorrected", cf.odds_uncorrected.z);
  kv::line(os, "bias_alpha", cf.bias.b_alpha);
  kv::line(os, "bias_gamma", cf.bias.b_gamma);
  kv::line(os, "bias_rho", cf.bias.b_rho);
  kv::line(os, "I", std::to_string(cf.dims.I));
  kv::line(os, "J", std::to_string(cf.dims.J));
  kv::line(os, "T", std::to_string(cf.dims.T));
  kv::line(os, "n", std::to_string(cf.dims.n));
}

inline void write_lemma_report(std::ostream& os, const LemmaReport& rep) {
  kv::line(os, "lambda_min", rep.lambda_min);
  kv::line(os, "c_min", rep.c_min);
  kv::line(os, "bound_margin", rep.bound_margin);
  kv::line(os, "block_inverse_max_err", rep.block_inverse_max_err);
  kv::line(os, "offdiag_max", rep.offdiag_max);
  kv::line(os, "hinv_minus_dinv_max", rep.hinv_minus_dinv_max);
  kv::line(os, "wv_max_abs", rep.wv_max_abs);
  kv::line(os, "rank_v", std::to_string(rep.rank_v));
}

inline void write_study_csv(std::ostream& os, const std::vector<McSummary>& summaries) {
  os << "N,T,estimator,reps_requested,reps_used,failures,rel_bias_pct,bias_sd,"
        "coverage,mean_se,sd_beta\n";
  auto row = [&](const McSummary& s, const char* name, const EstimatorSummary& e) {
    os << s.N << ',' << s.T << ',' << name << ',' << s.reps_requested << ','
       << s.reps_used << ',' << s.failures << ',' << num(e.rel_bias_pct) << ','
       << num(e.bias_sd) << ',' << num(e.coverage) << ',' << num(e.mean_se) << ','
       << num(e.sd) << '\n';
  };
  for (const auto& s : summaries) {
    row(s, "uncorrected", s.uncorrected);
    row(s, "debiased", s.debiased);
  }
}

inline void write_study_kv(std::ostream& os, const std::vector<McSummary>& summaries) {
  auto block = [&](const char* name, const EstimatorSummary& e) {
    const std::string p = std::string(name) + "_";
    kv::line(os, p + "rel_bias_pct", e.rel_bias_pct);
    kv::line(os, p + "bias_sd", e.bias_sd);
    kv::line(os, p + "coverage", e.coverage);
    kv::line(os, p + "mean_se", e.mean_se);
    kv::line(os, p + "sd_beta", e.sd);
  };
  for (const auto& s : summaries) {
    kv::line(os, "cell", std::to_string(s.N) + "x" + std::to_string(s.T));
    kv::line(os, "reps_requested", std::to_string(s.reps_requested));
    kv::line(os, "reps_used", std::to_string(s.reps_used));
    kv::line(os, "failures", std::to_string(s.failures));
    block("uncorrected", s.uncorrected);
    block("debiased", s.debiased);
  }
}

inline void write_normdiff_csv(std::ostream& os,
                               const std::vector<NormDiffRecord>& records) {
  os << "N,T,rep,estimator,scaled_a,scaled_b\n";
  for (const auto& r : records) {
    os << r.N << ',' << r.T << ',' << r.rep << ",uncorrected," << num(r.unc_a)
       << ',' << num(r.unc_b) << '\n';
    os << r.N << ',' << r.T << ',' << r.rep << ",debiased," << num(r.deb_a) << ','
       << num(r.deb_b) << '\n';
  }
}

inline void write_panel_rows_csv(std::ostream& os, const Panel& p) {
  os << "i,j,t,y";
  for (const auto& name : p.regressor_names()) os << ',' << name;
  os << '\n';
  for (std::int64_t o = 0; o < p.n(); ++o) {
    const auto so = static_cast<std::size_t>(o);
    os << p.i_labels()[static_cast<std::size_t>(p.i_of()[so])] << ','
       << p.j_labels()[static_cast<std::size_t>(p.j_of()[so])] << ','
       << p.t_labels()[static_cast<std::size_t>(p.t_of()[so])] << ','
       << static_cast<int>(p.y()[so]);
    for (int k = 0; k < p.K(); ++k) os << ',' << num(p.x(k)[so]);
    os << '\n';
  }
}

}  // namespace trilogit
