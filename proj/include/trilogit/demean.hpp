#pragma once

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "trilogit/errors.hpp"
#include "trilogit/panel.hpp"

namespace trilogit {

// Weighted least-squares projection of a vector onto the orthogonal
// complement of the it/jt/ij dummy span, computed by cyclic sweeps of
// weighted within-cell demeaning (block Gauss-Seidel on the dummy normal
// equations). A sweep visits the families in the fixed order it, jt, ij;
// iteration stops when the largest absolute change of any entry over a full
// sweep falls below tol.
//
// Every basic operation subtracts an element of the dummy span, and the
// Irons-Tuck extrapolation used between sweeps forms linear combinations of
// such states, so the iterate always stays in {z - span}; the limit is the
// unique weighted projection residual.
class TripleDemeaner {
 public:
  explicit TripleDemeaner(const Panel& p) : panel_(&p) {
    n_ = static_cast<std::size_t>(p.n());
    for (int f = 0; f < 3; ++f) {
      const CellFamily& fam = p.cells(static_cast<Family>(f));
      inv_den_[f].resize(fam.labels.size());
      mean_[f].resize(fam.labels.size());
    }
    delta_.resize(n_);
    prev_.resize(n_);
    prev2_.resize(n_);
  }

  // Recomputes the per-cell weight sums. Weights must be strictly positive.
  void set_weights(const std::vector<double>& w) {
    if (w.size() != n_) throw std::invalid_argument("weight length mismatch");
    w_ = w;
    max_w_ = 0.0;
    for (double v : w) {
      if (!(v > 0.0)) throw std::invalid_argument("weights must be strictly positive");
      max_w_ = std::max(max_w_, v);
    }
    for (int f = 0; f < 3; ++f) {
      const CellFamily& fam = panel_->cells(static_cast<Family>(f));
      auto& den = inv_den_[f];
      std::fill(den.begin(), den.end(), 0.0);
      const std::int32_t* ids = fam.cell_of.data();
      for (std::size_t o = 0; o < n_; ++o) den[static_cast<std::size_t>(ids[o])] += w[o];
      for (auto& d : den) d = 1.0 / d;
    }
  }

  // Demeans z into out. If fit is non-null it holds the dummy-span component
  // from a previous call and is used as the starting point, then updated to
  // z - out on return. Returns the number of sweeps performed.
  int demean(const double* z, double* out, double tol, int max_sweeps,
             std::vector<double>* fit = nullptr, bool accelerate = true) const {
    double* r = out;
    if (fit != nullptr && fit->size() == n_) {
      for (std::size_t o = 0; o < n_; ++o) r[o] = z[o] - (*fit)[o];
    } else {
      std::memcpy(r, z, n_ * sizeof(double));
    }

    int sweeps = 0;
    int since_accel = 0;
    double last_delta = 0.0;
    bool done = false;
    while (sweeps < max_sweeps) {
      last_delta = sweep(r);
      ++sweeps;
      if (last_delta < tol) { done = true; break; }
      if (accelerate) {
        ++since_accel;
        if (since_accel == 1) {
          std::memcpy(prev2_.data(), r, n_ * sizeof(double));
        } else if (since_accel == 3) {
          extrapolate(r);
          since_accel = 0;
        } else if (since_accel == 2) {
          std::memcpy(prev_.data(), r, n_ * sizeof(double));
        }
      }
    }
    if (!done)
      throw NonConvergence("triple demeaning exceeded max_sweeps", last_delta);
    if (fit != nullptr) {
      fit->resize(n_);
      for (std::size_t o = 0; o < n_; ++o) (*fit)[o] = z[o] - r[o];
    }
    return sweeps;
  }

  double max_weight() const { return max_w_; }

 private:
  // One full cyclic sweep; returns the max absolute entry change.
  double sweep(double* r) const {
    std::memset(delta_.data(), 0, n_ * sizeof(double));
    for (int f = 0; f < 3; ++f) {
      const CellFamily& fam = panel_->cells(static_cast<Family>(f));
      const std::int32_t* ids = fam.cell_of.data();
      auto& mean = mean_[f];
      const auto& inv_den = inv_den_[f];
      std::fill(mean.begin(), mean.end(), 0.0);
      for (std::size_t o = 0; o < n_; ++o)
        mean[static_cast<std::size_t>(ids[o])] += w_[o] * r[o];
      for (std::size_t c = 0; c < mean.size(); ++c) mean[c] *= inv_den[c];
      for (std::size_t o = 0; o < n_; ++o) {
        const double m = mean[static_cast<std::size_t>(ids[o])];
        r[o] -= m;
        delta_[o] += m;
      }
    }
    double md = 0.0;
    for (std::size_t o = 0; o < n_; ++o) md = std::max(md, std::abs(delta_[o]));
    return md;
  }

  // Irons-Tuck step from the pair of sweep increments ending at r.
  void extrapolate(double* r) const {
    double num = 0.0, den = 0.0;
    for (std::size_t o = 0; o < n_; ++o) {
      const double d2 = r[o] - prev_[o];
      const double dd = d2 - (prev_[o] - prev2_[o]);
      num += d2 * dd;
      den += dd * dd;
    }
    if (!(den > 0.0)) return;
    const double lambda = num / den;
    if (!std::isfinite(lambda)) return;
    for (std::size_t o = 0; o < n_; ++o) r[o] -= lambda * (r[o] - prev_[o]);
  }

  const Panel* panel_;
  std::size_t n_ = 0;
  std::vector<double> w_;
  double max_w_ = 0.0;
  std::vector<double> inv_den_[3];
  mutable std::vector<double> mean_[3];
  mutable std::vector<double> delta_, prev_, prev2_;
};

// One-shot form of the projection above.
inline std::vector<double> weighted_triple_demean(const std::vector<double>& z,
                                                  const std::vector<double>& weights,
                                                  const Panel& panel, double tol,
                                                  int max_sweeps) {
  TripleDemeaner dm(panel);
  dm.set_weights(weights);
  std::vector<double> out(z.size());
  dm.demean(z.data(), out.data(), tol, max_sweeps);
  return out;
}

}  // namespace trilogit
