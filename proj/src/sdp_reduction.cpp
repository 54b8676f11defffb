#include "sdp_reduction.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace umos::detail {

namespace {

struct CanonRow {
  // key: (block, entry id) -> coef
  std::map<std::pair<int, int>, double> entries;
  std::map<int, double> frees;
  double rhs = 0.0;
};

CanonRow canonicalize(const SDPProblem& prob, const EqualityRow& row) {
  CanonRow out;
  out.rhs = row.rhs;
  for (const auto& t : row.entries) {
    int id = tri_id(prob.block_sides[t.block], t.row, t.col);
    out.entries[{t.block, id}] += t.coef;
  }
  for (const auto& t : row.frees) out.frees[t.var] += t.coef;
  for (auto it = out.entries.begin(); it != out.entries.end();)
    it = (it->second == 0.0) ? out.entries.erase(it) : std::next(it);
  for (auto it = out.frees.begin(); it != out.frees.end();)
    it = (it->second == 0.0) ? out.frees.erase(it) : std::next(it);
  return out;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

Reduction reduce(const SDPProblem& prob) {
  prob.validate();
  Reduction red;
  const int nb = prob.num_blocks();
  red.n_orig = prob.num_free;

  std::vector<CanonRow> rows;
  rows.reserve(prob.equalities.size());
  for (const auto& r : prob.equalities) rows.push_back(canonicalize(prob, r));

  red.entry_expr.resize(nb);
  red.entry_pin.resize(nb);
  red.entry_refs.resize(nb);
  red.obj_entry_coef.resize(nb);
  for (int j = 0; j < nb; ++j) {
    int m = tri_count(prob.block_sides[j]);
    red.entry_expr[j].resize(m);
    red.entry_pin[j].resize(m);
    red.entry_refs[j].resize(m);
    red.obj_entry_coef[j].assign(m, 0.0);
  }
  for (const auto& t : prob.objective.entries) {
    int id = tri_id(prob.block_sides[t.block], t.row, t.col);
    red.obj_entry_coef[t.block][id] += t.coef;
  }

  // Pass 1: single-entry rows become pins.
  std::vector<int> deferred;
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
    const CanonRow& r = rows[i];
    if (r.entries.size() != 1) {
      deferred.push_back(i);
      continue;
    }
    auto [key, gamma] = *r.entries.begin();
    auto [j, id] = key;
    if (red.entry_pin[j][id].row >= 0) {
      deferred.push_back(i);
      continue;
    }
    double scale = std::abs(gamma);
    for (const auto& [v, a] : r.frees) scale = std::max(scale, std::abs(a));
    if (std::abs(gamma) < 1e-10 * scale) {
      deferred.push_back(i);
      continue;
    }
    red.entry_pin[j][id] = {i, gamma};
    AffineExpr& e = red.entry_expr[j][id];
    e.constant = r.rhs / gamma;
    for (const auto& [v, a] : r.frees) e.terms.emplace_back(v, -a / gamma);
  }

  // Fresh variables for every entry not pinned by a row.
  int next_var = prob.num_free;
  for (int j = 0; j < nb; ++j) {
    int side = prob.block_sides[j];
    for (int r = 0; r < side; ++r)
      for (int c = r; c < side; ++c) {
        int id = tri_id(side, r, c);
        if (red.entry_pin[j][id].row < 0)
          red.entry_expr[j][id].terms.emplace_back(next_var++, 1.0);
      }
  }
  red.n_red = next_var;

  // Pass 2: substitute entry expressions into the remaining rows.
  for (int i : deferred) {
    const CanonRow& r = rows[i];
    std::map<int, double> acc;
    double rhs = r.rhs;
    for (const auto& [key, gamma] : r.entries) {
      auto [j, id] = key;
      red.entry_refs[j][id].emplace_back(i, gamma);
      const AffineExpr& e = red.entry_expr[j][id];
      rhs -= gamma * e.constant;
      for (const auto& [v, a] : e.terms) acc[v] += gamma * a;
    }
    for (const auto& [v, a] : r.frees) acc[v] += a;
    for (auto it = acc.begin(); it != acc.end();)
      it = (std::abs(it->second) < 1e-14) ? acc.erase(it) : std::next(it);
    if (acc.empty()) {
      red.vacuous_rows.emplace_back(i, rhs);
      if (std::abs(rhs) > 1e-9) {
        red.trivially_infeasible = true;
        red.infeasible_row = i;
      }
      continue;  // vacuous row; its dual is zero
    }
    PureRow pr;
    pr.terms.assign(acc.begin(), acc.end());
    pr.rhs = rhs;
    pr.orig_row = i;
    red.rows.push_back(std::move(pr));
  }

  // Objective in reduced variables.
  red.c = Eigen::VectorXd::Zero(red.n_red);
  red.c0 = prob.objective.constant;
  for (const auto& t : prob.objective.frees) red.c(t.var) += t.coef;
  for (int j = 0; j < nb; ++j) {
    int side = prob.block_sides[j];
    for (int r = 0; r < side; ++r)
      for (int c = r; c < side; ++c) {
        int id = tri_id(side, r, c);
        double w = red.obj_entry_coef[j][id];
        if (w == 0.0) continue;
        const AffineExpr& e = red.entry_expr[j][id];
        red.c0 += w * e.constant;
        for (const auto& [v, a] : e.terms) red.c(v) += w * a;
      }
  }

  // Blocks: constant part and per-variable coefficient matrices.
  red.const_G.resize(nb);
  for (int j = 0; j < nb; ++j) {
    int side = prob.block_sides[j];
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(side, side);
    std::map<int, std::vector<EntryCoef>> per_var;
    for (int r = 0; r < side; ++r)
      for (int c = r; c < side; ++c) {
        const AffineExpr& e = red.entry_expr[j][tri_id(side, r, c)];
        G(r, c) = e.constant;
        G(c, r) = e.constant;
        for (const auto& [v, a] : e.terms) per_var[v].push_back({r, c, a});
      }
    red.const_G[j] = G;
    if (per_var.empty()) {
      red.const_blocks.push_back(j);
      continue;
    }
    RedBlock blk;
    blk.orig_block = j;
    blk.side = side;
    blk.G = G;
    for (auto& [v, coefs] : per_var) {
      blk.vars.push_back(v);
      blk.var_coefs.push_back(std::move(coefs));
    }
    red.blocks.push_back(std::move(blk));
  }

  // Connected components of reduced variables through shared blocks.
  UnionFind uf(red.n_red);
  for (const auto& blk : red.blocks)
    for (size_t t = 1; t < blk.vars.size(); ++t) uf.unite(blk.vars[t - 1], blk.vars[t]);

  red.var_comp.assign(red.n_red, -1);
  red.var_local.assign(red.n_red, -1);
  for (int v = 0; v < red.n_red; ++v) {
    int root = uf.find(v);
    if (red.var_comp[root] < 0) {
      red.var_comp[root] = red.n_comps++;
      red.comp_vars.emplace_back();
    }
    red.var_comp[v] = red.var_comp[root];
    red.var_local[v] = static_cast<int>(red.comp_vars[red.var_comp[v]].size());
    red.comp_vars[red.var_comp[v]].push_back(v);
  }

  red.comp_rows.resize(red.n_comps);
  red.comp_blocks.resize(red.n_comps);
  for (int i = 0; i < static_cast<int>(red.rows.size()); ++i) {
    PureRow& pr = red.rows[i];
    int comp = red.var_comp[pr.terms.front().first];
    bool single = std::all_of(pr.terms.begin(), pr.terms.end(),
                              [&](const auto& t) { return red.var_comp[t.first] == comp; });
    if (single) {
      pr.comp = comp;
      red.comp_rows[comp].push_back(i);
    } else {
      pr.comp = -1;
      red.border_rows.push_back(i);
    }
  }
  for (int b = 0; b < static_cast<int>(red.blocks.size()); ++b) {
    red.blocks[b].comp = red.var_comp[red.blocks[b].vars.front()];
    red.comp_blocks[red.blocks[b].comp].push_back(b);
  }
  return red;
}

std::vector<Eigen::MatrixXd> recover_block_values(const SDPProblem& prob,
                                                  const Reduction& red,
                                                  const Eigen::VectorXd& u_red) {
  std::vector<Eigen::MatrixXd> X(prob.num_blocks());
  for (int j = 0; j < prob.num_blocks(); ++j) {
    int side = prob.block_sides[j];
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(side, side);
    for (int r = 0; r < side; ++r)
      for (int c = r; c < side; ++c) {
        const AffineExpr& e = red.entry_expr[j][tri_id(side, r, c)];
        double val = e.constant;
        for (const auto& [v, a] : e.terms) val += a * u_red(v);
        M(r, c) = val;
        M(c, r) = val;
      }
    X[j] = M;
  }
  return X;
}

}  // namespace umos::detail
