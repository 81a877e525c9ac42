#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "trilogit/panel.hpp"

namespace trilogit {

// Logistic CDF and its first three derivatives, evaluated per observation.
// mu is clamped into the open unit interval; d1..d3 are computed from
// exp(-|eta|) directly so they stay positive long after mu itself saturates.
struct LinkEval {
  std::vector<double> eta, mu, d1, d2, d3;
  std::size_t size() const { return eta.size(); }
};

inline LinkEval logistic_link(std::vector<double> eta) {
  const std::size_t n = eta.size();
  LinkEval l;
  l.mu.resize(n);
  l.d1.resize(n);
  l.d2.resize(n);
  l.d3.resize(n);
  constexpr double mu_hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  constexpr double mu_lo = std::numeric_limits<double>::epsilon() / 2;
  for (std::size_t o = 0; o < n; ++o) {
    const double e = eta[o];
    const double t = std::exp(-std::abs(e));  // in (0, 1]
    const double denom = 1.0 + t;
    double mu = (e >= 0.0) ? 1.0 / denom : t / denom;
    mu = std::min(std::max(mu, mu_lo), mu_hi);
    const double d1 = t / (denom * denom);            // mu (1 - mu)
    const double one_minus_2mu = (e >= 0.0) ? (t - 1.0) / denom : (1.0 - t) / denom;
    l.mu[o] = mu;
    l.d1[o] = d1;
    l.d2[o] = d1 * one_minus_2mu;
    l.d3[o] = d1 * (1.0 - 6.0 * d1);
  }
  l.eta = std::move(eta);
  return l;
}

// Unpenalized, unscaled log-likelihood sum_o [y log mu + (1-y) log(1-mu)],
// evaluated from eta in log1p form.
inline double log_likelihood(const Panel& panel, const LinkEval& link) {
  double ll = 0.0;
  const auto& y = panel.y();
  for (std::size_t o = 0; o < link.size(); ++o) {
    const double e = link.eta[o];
    const double t = std::exp(-std::abs(e));
    const double log1pt = std::log1p(t);
    // log mu = -log1p(t) for eta >= 0, eta - log1p(t) otherwise; log(1-mu) mirrors.
    const double log_mu = (e >= 0.0) ? -log1pt : e - log1pt;
    const double log_1mmu = (e >= 0.0) ? -e - log1pt : -log1pt;
    ll += (y[o] != 0.0) ? log_mu : log_1mmu;
  }
  return ll;
}

inline double deviance(const Panel& panel, const LinkEval& link) {
  return -2.0 * log_likelihood(panel, link);
}

}  // namespace trilogit
