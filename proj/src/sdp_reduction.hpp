#pragma once

// Internal presolve: rewrites an SDPProblem into "LMI form".  Equality rows
// that reference exactly one PSD block entry pin that entry to an affine
// expression of the free variables; entries never pinned get fresh free
// variables; all remaining rows are rewritten over free variables only.
// The interior-point iteration then works on
//
//   min c^T u + c0   s.t.   rows: sum coef*u = rhs,   X_j = G_j + P_j(u) PSD,
//
// and free variables are grouped into connected components (variables
// sharing a PSD block), so the KKT systems factor component by component
// with rows spanning several components handled as a border.

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "umos/sdp.hpp"

namespace umos::detail {

inline int tri_count(int side) { return side * (side + 1) / 2; }
inline int tri_id(int side, int r, int c) {  // r <= c, row-major upper triangle
  return r * side - r * (r - 1) / 2 + (c - r);
}

struct AffineExpr {
  double constant = 0.0;
  std::vector<std::pair<int, double>> terms;  // (reduced var, coef), sorted
};

struct EntryCoef {
  int r, c;  // r <= c
  double v;
};

struct RedBlock {
  int orig_block = -1;
  int side = 0;
  Eigen::MatrixXd G;
  std::vector<int> vars;                          // global reduced ids, sorted
  std::vector<std::vector<EntryCoef>> var_coefs;  // parallel to vars
  int comp = -1;
};

struct PureRow {
  std::vector<std::pair<int, double>> terms;  // (reduced var, coef), sorted
  double rhs = 0.0;
  int orig_row = -1;
  int comp = -1;  // component id; -1 when the row spans several (border)
};

struct PinInfo {
  int row = -1;  // original equality row acting as the pin, -1 if fresh var
  double coef = 0.0;
};

struct Reduction {
  int n_orig = 0;
  int n_red = 0;
  Eigen::VectorXd c;
  double c0 = 0.0;

  std::vector<RedBlock> blocks;     // blocks that depend on variables
  std::vector<int> const_blocks;    // original ids of fully constant blocks
  std::vector<PureRow> rows;

  // per original block
  std::vector<std::vector<AffineExpr>> entry_expr;
  std::vector<std::vector<PinInfo>> entry_pin;
  // references to an entry from rows other than its pin: (orig row, coef)
  std::vector<std::vector<std::vector<std::pair<int, double>>>> entry_refs;
  std::vector<std::vector<double>> obj_entry_coef;  // canonical objective coef per entry
  std::vector<Eigen::MatrixXd> const_G;             // constant part per original block

  bool trivially_infeasible = false;
  int infeasible_row = -1;  // empty row with nonzero rhs
  // rows whose support vanished entirely under substitution: (orig row, residual rhs)
  std::vector<std::pair<int, double>> vacuous_rows;

  int n_comps = 0;
  std::vector<int> var_comp;
  std::vector<int> var_local;
  std::vector<std::vector<int>> comp_vars;
  std::vector<std::vector<int>> comp_rows;    // indices into rows
  std::vector<std::vector<int>> comp_blocks;  // indices into blocks
  std::vector<int> border_rows;               // indices into rows
};

Reduction reduce(const SDPProblem& prob);

// X_j for every original block from the reduced variable vector.
std::vector<Eigen::MatrixXd> recover_block_values(const SDPProblem& prob,
                                                  const Reduction& red,
                                                  const Eigen::VectorXd& u_red);

}  // namespace umos::detail
