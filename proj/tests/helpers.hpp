#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "trilogit/panel.hpp"

namespace testutil {

using trilogit::Family;
using trilogit::Panel;
using trilogit::RawRow;

inline RawRow row(const std::string& i, const std::string& j, const std::string& t,
                  double y, std::vector<double> x = {0.0}) {
  RawRow r;
  r.i = i;
  r.j = j;
  r.t = t;
  r.y = y;
  r.x = std::move(x);
  return r;
}

// Random panel over the full I x J x T grid (optionally holding out the
// diagonal or random cells), with y drawn Bernoulli(p) and one regressor.
inline Panel random_panel(int I, int J, int T, unsigned seed, double p = 0.5,
                          bool skip_diagonal = false, double keep_prob = 1.0) {
  std::mt19937 rng(seed);
  std::bernoulli_distribution outcome(p);
  std::bernoulli_distribution keep(keep_prob);
  std::normal_distribution<double> reg(0.0, 1.0);
  std::vector<RawRow> rows;
  for (int i = 0; i < I; ++i)
    for (int j = 0; j < J; ++j)
      for (int t = 0; t < T; ++t) {
        if (skip_diagonal && i == j) continue;
        if (!keep(rng)) continue;
        rows.push_back(row("i" + std::to_string(i), "j" + std::to_string(j),
                           "t" + std::to_string(t), outcome(rng) ? 1.0 : 0.0,
                           {reg(rng)}));
      }
  return trilogit::build_panel(rows, {"x"});
}

// Canonical textual form of a panel for equality checks.
inline std::string signature(const Panel& p) {
  std::ostringstream os;
  for (std::int64_t o = 0; o < p.n(); ++o) {
    const auto so = static_cast<std::size_t>(o);
    os << p.i_labels()[static_cast<std::size_t>(p.i_of()[so])] << '|'
       << p.j_labels()[static_cast<std::size_t>(p.j_of()[so])] << '|'
       << p.t_labels()[static_cast<std::size_t>(p.t_of()[so])] << '|' << p.y()[so];
    for (int k = 0; k < p.K(); ++k) os << '|' << p.x(k)[so];
    os << '\n';
  }
  return os.str();
}

// Reference pruner: deletes one constant cell at a time in a caller-shuffled
// order, rescanning everything after every deletion.
inline Panel brute_force_prune(const Panel& input, unsigned order_seed) {
  std::mt19937 rng(order_seed);
  Panel cur = input;
  for (;;) {
    struct Hit {
      Family f;
      int cell;
    };
    std::vector<Hit> hits;
    for (Family f : {Family::it, Family::jt, Family::ij}) {
      const auto& fam = cur.cells(f);
      for (int c = 0; c < fam.count(); ++c) {
        double sum = 0.0;
        for (auto o : fam.members[static_cast<std::size_t>(c)])
          sum += cur.y()[static_cast<std::size_t>(o)];
        if (sum == 0.0 ||
            sum == static_cast<double>(fam.members[static_cast<std::size_t>(c)].size()))
          hits.push_back({f, c});
      }
    }
    if (hits.empty()) return cur;
    const Hit pick = hits[std::uniform_int_distribution<std::size_t>(
        0, hits.size() - 1)(rng)];
    std::vector<char> keep(static_cast<std::size_t>(cur.n()), 1);
    for (auto o : cur.cells(pick.f).members[static_cast<std::size_t>(pick.cell)])
      keep[static_cast<std::size_t>(o)] = 0;
    std::vector<RawRow> rows;
    auto all = cur.to_rows();
    for (std::size_t o = 0; o < all.size(); ++o)
      if (keep[o]) rows.push_back(all[o]);
    if (rows.empty()) return trilogit::build_panel({}, cur.regressor_names());
    cur = trilogit::build_panel(rows, cur.regressor_names());
  }
}

// Dense weighted least squares of z on the full dummy matrix, with a small
// ridge on the dummy block; reference for the alternating projections.
inline std::vector<double> dense_wls_residual(const Panel& p,
                                              const std::vector<double>& z,
                                              const std::vector<double>& w,
                                              double ridge = 1e-10) {
  const auto n = p.n();
  const int pa = p.it_cells().count(), pg = p.jt_cells().count(),
            pr = p.ij_cells().count();
  const int P = pa + pg + pr;
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, P);
  for (std::int64_t o = 0; o < n; ++o) {
    const auto so = static_cast<std::size_t>(o);
    D(o, p.it_cells().cell_of[so]) = 1.0;
    D(o, pa + p.jt_cells().cell_of[so]) = 1.0;
    D(o, pa + pg + p.ij_cells().cell_of[so]) = 1.0;
  }
  Eigen::VectorXd wv = Eigen::Map<const Eigen::VectorXd>(w.data(), n);
  Eigen::VectorXd zv = Eigen::Map<const Eigen::VectorXd>(z.data(), n);
  Eigen::MatrixXd normal = D.transpose() * wv.asDiagonal() * D +
                           ridge * Eigen::MatrixXd::Identity(P, P);
  Eigen::VectorXd phi = normal.ldlt().solve(D.transpose() * (wv.asDiagonal() * zv));
  Eigen::VectorXd res = zv - D * phi;
  return {res.data(), res.data() + n};
}

}  // namespace testutil
