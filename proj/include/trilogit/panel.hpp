#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "trilogit/errors.hpp"

namespace trilogit {

// One raw observation: opaque sender/receiver/period labels, a binary outcome
// and K regressor values.
struct RawRow {
  std::string i, j, t;
  double y = 0.0;
  std::vector<double> x;
  std::size_t row = 0;  // position in the source (for error messages)
};

enum class Family : int { it = 0, jt = 1, ij = 2 };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::it: return "it";
    case Family::jt: return "jt";
    default: return "ij";
  }
}

// Group cells of one family. Cells are ordered lexicographically by their
// (first, second) label indexes so that downstream dense constructions line
// up with the constraint-matrix layout.
struct CellFamily {
  std::vector<std::int32_t> cell_of;               // per observation
  std::vector<std::array<std::int32_t, 2>> labels; // per cell
  std::vector<std::vector<std::int32_t>> members;  // per cell
  int count() const { return static_cast<int>(labels.size()); }
};

// Immutable three-dimensional panel. Construction assigns dense label indexes
// in first-appearance order and materializes the it/jt/ij cell families; after
// that the object is never mutated, so it is safe to share across threads.
class Panel {
 public:
  Panel() = default;

  std::int64_t n() const { return static_cast<std::int64_t>(y_.size()); }
  int I() const { return static_cast<int>(i_labels_.size()); }
  int J() const { return static_cast<int>(j_labels_.size()); }
  int T() const { return static_cast<int>(t_labels_.size()); }
  int K() const { return static_cast<int>(x_.size()); }

  const std::vector<double>& y() const { return y_; }
  const std::vector<double>& x(int k) const { return x_[static_cast<std::size_t>(k)]; }
  const std::vector<std::string>& regressor_names() const { return x_names_; }

  const std::vector<std::int32_t>& i_of() const { return i_of_; }
  const std::vector<std::int32_t>& j_of() const { return j_of_; }
  const std::vector<std::int32_t>& t_of() const { return t_of_; }
  const std::vector<std::string>& i_labels() const { return i_labels_; }
  const std::vector<std::string>& j_labels() const { return j_labels_; }
  const std::vector<std::string>& t_labels() const { return t_labels_; }

  const CellFamily& cells(Family f) const { return cells_[static_cast<int>(f)]; }
  const CellFamily& it_cells() const { return cells(Family::it); }
  const CellFamily& jt_cells() const { return cells(Family::jt); }
  const CellFamily& ij_cells() const { return cells(Family::ij); }

  // True when the panel is the complete I x J x T grid.
  bool balanced() const {
    return n() == static_cast<std::int64_t>(I()) * J() * T();
  }

  // Observation counts per label, one vector per index family.
  std::vector<std::int64_t> counts_i() const { return count_by(i_of_, I()); }
  std::vector<std::int64_t> counts_j() const { return count_by(j_of_, J()); }
  std::vector<std::int64_t> counts_t() const { return count_by(t_of_, T()); }

  std::vector<RawRow> to_rows() const {
    std::vector<RawRow> rows(static_cast<std::size_t>(n()));
    for (std::size_t o = 0; o < rows.size(); ++o) {
      RawRow& r = rows[o];
      r.i = i_labels_[static_cast<std::size_t>(i_of_[o])];
      r.j = j_labels_[static_cast<std::size_t>(j_of_[o])];
      r.t = t_labels_[static_cast<std::size_t>(t_of_[o])];
      r.y = y_[o];
      r.x.resize(static_cast<std::size_t>(K()));
      for (int k = 0; k < K(); ++k) r.x[static_cast<std::size_t>(k)] = x_[static_cast<std::size_t>(k)][o];
      r.row = o;
    }
    return rows;
  }

  // Index-level constructor used by the simulation generator and by pruning,
  // where labels and dense indexes are already consistent. Performs the same
  // cell-family construction as build_panel but skips per-row validation.
  static Panel from_indexed(std::vector<std::string> i_labels,
                            std::vector<std::string> j_labels,
                            std::vector<std::string> t_labels,
                            std::vector<std::int32_t> i_of,
                            std::vector<std::int32_t> j_of,
                            std::vector<std::int32_t> t_of,
                            std::vector<double> y,
                            std::vector<std::vector<double>> x,
                            std::vector<std::string> x_names) {
    Panel p;
    p.i_labels_ = std::move(i_labels);
    p.j_labels_ = std::move(j_labels);
    p.t_labels_ = std::move(t_labels);
    p.i_of_ = std::move(i_of);
    p.j_of_ = std::move(j_of);
    p.t_of_ = std::move(t_of);
    p.y_ = std::move(y);
    p.x_ = std::move(x);
    p.x_names_ = std::move(x_names);
    p.build_cells();
    return p;
  }

 private:
  friend Panel build_panel(const std::vector<RawRow>&, std::vector<std::string>);

  static std::vector<std::int64_t> count_by(const std::vector<std::int32_t>& idx, int m) {
    std::vector<std::int64_t> c(static_cast<std::size_t>(m), 0);
    for (auto v : idx) ++c[static_cast<std::size_t>(v)];
    return c;
  }

  void build_cells() {
    build_family(Family::it, i_of_, t_of_, T());
    build_family(Family::jt, j_of_, t_of_, T());
    build_family(Family::ij, i_of_, j_of_, J());
  }

  void build_family(Family f, const std::vector<std::int32_t>& a,
                    const std::vector<std::int32_t>& b, int dim_b) {
    CellFamily& fam = cells_[static_cast<int>(f)];
    const std::size_t nobs = y_.size();
    std::vector<std::int64_t> key(nobs);
    for (std::size_t o = 0; o < nobs; ++o)
      key[o] = static_cast<std::int64_t>(a[o]) * dim_b + b[o];
    // Compact the occurring keys in increasing order.
    std::vector<std::int64_t> uniq = key;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    fam.labels.resize(uniq.size());
    for (std::size_t c = 0; c < uniq.size(); ++c)
      fam.labels[c] = {static_cast<std::int32_t>(uniq[c] / dim_b),
                       static_cast<std::int32_t>(uniq[c] % dim_b)};
    fam.cell_of.resize(nobs);
    fam.members.assign(uniq.size(), {});
    for (std::size_t o = 0; o < nobs; ++o) {
      auto it = std::lower_bound(uniq.begin(), uniq.end(), key[o]);
      auto c = static_cast<std::int32_t>(it - uniq.begin());
      fam.cell_of[o] = c;
      fam.members[static_cast<std::size_t>(c)].push_back(static_cast<std::int32_t>(o));
    }
  }

  std::vector<std::string> i_labels_, j_labels_, t_labels_;
  std::vector<std::int32_t> i_of_, j_of_, t_of_;
  std::vector<double> y_;
  std::vector<std::vector<double>> x_;  // column per regressor
  std::vector<std::string> x_names_;
  std::array<CellFamily, 3> cells_;
};

// Validates raw rows and assembles the indexed panel.
inline Panel build_panel(const std::vector<RawRow>& rows,
                         std::vector<std::string> x_names) {
  Panel p;
  const std::size_t nobs = rows.size();
  const int K = static_cast<int>(x_names.size());
  p.x_names_ = std::move(x_names);
  p.x_.assign(static_cast<std::size_t>(K), std::vector<double>(nobs));
  p.y_.resize(nobs);
  p.i_of_.resize(nobs);
  p.j_of_.resize(nobs);
  p.t_of_.resize(nobs);

  std::unordered_map<std::string, std::int32_t> imap, jmap, tmap;
  auto intern = [](std::unordered_map<std::string, std::int32_t>& m,
                   std::vector<std::string>& labels, const std::string& s) {
    auto [it, inserted] = m.emplace(s, static_cast<std::int32_t>(labels.size()));
    if (inserted) labels.push_back(s);
    return it->second;
  };

  std::unordered_map<std::string, std::size_t> seen;
  seen.reserve(nobs * 2);
  for (std::size_t o = 0; o < nobs; ++o) {
    const RawRow& r = rows[o];
    if (r.y != 0.0 && r.y != 1.0) throw NonBinaryOutcome(r.row);
    if (static_cast<int>(r.x.size()) != K)
      throw DataError("row " + std::to_string(r.row) + " has " +
                      std::to_string(r.x.size()) + " regressors, expected " +
                      std::to_string(K));
    for (int k = 0; k < K; ++k) {
      if (!std::isfinite(r.x[static_cast<std::size_t>(k)]))
        throw NonFiniteRegressor(r.row, k);
      p.x_[static_cast<std::size_t>(k)][o] = r.x[static_cast<std::size_t>(k)];
    }
    std::string key = r.i + '\x1f' + r.j + '\x1f' + r.t;
    if (!seen.emplace(std::move(key), o).second) throw DuplicateKey(r.i, r.j, r.t);
    p.i_of_[o] = intern(imap, p.i_labels_, r.i);
    p.j_of_[o] = intern(jmap, p.j_labels_, r.j);
    p.t_of_[o] = intern(tmap, p.t_labels_, r.t);
    p.y_[o] = r.y;
  }
  p.build_cells();
  return p;
}

struct DroppedCell {
  Family family;
  std::string label_a, label_b;
  std::string reason;  // "all-zero" or "all-one"
};

struct DropReport {
  int rounds = 0;
  std::vector<DroppedCell> dropped_cells;
  std::int64_t dropped_observation_count = 0;
};

namespace detail {

// Rebuilds a panel from a keep-mask, re-densifying label indexes in
// first-appearance order over the survivors.
inline Panel subset_panel(const Panel& p, const std::vector<char>& keep) {
  std::vector<std::int32_t> imap(static_cast<std::size_t>(p.I()), -1);
  std::vector<std::int32_t> jmap(static_cast<std::size_t>(p.J()), -1);
  std::vector<std::int32_t> tmap(static_cast<std::size_t>(p.T()), -1);
  std::vector<std::string> ilab, jlab, tlab;
  std::vector<std::int32_t> i_of, j_of, t_of;
  std::vector<double> y;
  std::vector<std::vector<double>> x(static_cast<std::size_t>(p.K()));
  auto remap = [](std::vector<std::int32_t>& m, std::vector<std::string>& lab,
                  const std::vector<std::string>& src, std::int32_t old) {
    if (m[static_cast<std::size_t>(old)] < 0) {
      m[static_cast<std::size_t>(old)] = static_cast<std::int32_t>(lab.size());
      lab.push_back(src[static_cast<std::size_t>(old)]);
    }
    return m[static_cast<std::size_t>(old)];
  };
  for (std::int64_t o = 0; o < p.n(); ++o) {
    if (!keep[static_cast<std::size_t>(o)]) continue;
    const auto so = static_cast<std::size_t>(o);
    i_of.push_back(remap(imap, ilab, p.i_labels(), p.i_of()[so]));
    j_of.push_back(remap(jmap, jlab, p.j_labels(), p.j_of()[so]));
    t_of.push_back(remap(tmap, tlab, p.t_labels(), p.t_of()[so]));
    y.push_back(p.y()[so]);
    for (int k = 0; k < p.K(); ++k)
      x[static_cast<std::size_t>(k)].push_back(p.x(k)[so]);
  }
  return Panel::from_indexed(std::move(ilab), std::move(jlab), std::move(tlab),
                             std::move(i_of), std::move(j_of), std::move(t_of),
                             std::move(y), std::move(x), p.regressor_names());
}

}  // namespace detail

// Removes uninformative observations: any cell, in any family, whose member
// outcomes are constant cannot identify its fixed effect, so all its members
// are dropped. A removal can turn a previously varying cell constant, so the
// scan repeats until a full pass removes nothing. The fixed point is the
// unique maximal subset with within-cell outcome variation everywhere, hence
// independent of scan order.
inline std::pair<Panel, DropReport> drop_uninformative(const Panel& panel) {
  Panel cur = panel;
  DropReport report;
  int removing_rounds = 0;
  for (;;) {
    const std::int64_t nobs = cur.n();
    std::vector<char> keep(static_cast<std::size_t>(nobs), 1);
    bool removed = false;
    for (Family f : {Family::it, Family::jt, Family::ij}) {
      const CellFamily& fam = cur.cells(f);
      for (int c = 0; c < fam.count(); ++c) {
        const auto& mem = fam.members[static_cast<std::size_t>(c)];
        double sum = 0.0;
        for (auto o : mem) sum += cur.y()[static_cast<std::size_t>(o)];
        const bool all_zero = (sum == 0.0);
        const bool all_one = (sum == static_cast<double>(mem.size()));
        if (!all_zero && !all_one) continue;
        removed = true;
        const auto& lab = fam.labels[static_cast<std::size_t>(c)];
        const auto& a_lab = (f == Family::jt) ? cur.j_labels() : cur.i_labels();
        const auto& b_lab = (f == Family::ij) ? cur.j_labels() : cur.t_labels();
        report.dropped_cells.push_back(
            {f, a_lab[static_cast<std::size_t>(lab[0])],
             b_lab[static_cast<std::size_t>(lab[1])],
             all_zero ? "all-zero" : "all-one"});
        for (auto o : mem) keep[static_cast<std::size_t>(o)] = 0;
      }
    }
    if (!removed) break;
    ++removing_rounds;
    std::int64_t kept = 0;
    for (auto k : keep) kept += k;
    report.dropped_observation_count += nobs - kept;
    if (kept == 0) throw NoInformativeData();
    cur = detail::subset_panel(cur, keep);
  }
  report.rounds = std::max(removing_rounds, 1);
  if (cur.I() < 2 || cur.J() < 2 || cur.T() < 2)
    throw NoInformativeData();
  return {std::move(cur), std::move(report)};
}

}  // namespace trilogit
