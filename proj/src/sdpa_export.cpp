#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdp_reduction.hpp"
#include "umos/sdp.hpp"

namespace umos {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// Sparse SDPA (.dat-s).  The problem is first reduced to LMI form
//   min c^T x  s.t.  X_j = sum_i x_i P_{j,i} + G_j >= 0,  A x = d,
// so the SDPA variables are the reduced free variables, F0_j = -G_j and
// F_{i,j} = P_{j,i}.  Each remaining equality row contributes a +/- pair of
// entries in a trailing diagonal block.
void write_sdpa(const SDPProblem& prob, std::ostream& os) {
  detail::Reduction red = detail::reduce(prob);

  std::vector<const detail::RedBlock*> by_orig(prob.num_blocks(), nullptr);
  for (const auto& blk : red.blocks) by_orig[blk.orig_block] = &blk;

  std::vector<std::pair<int, double>> lp_const;  // vacuous rows with nonzero rhs
  for (const auto& [row, rhs] : red.vacuous_rows)
    if (rhs != 0.0) lp_const.emplace_back(row, rhs);

  int nrows = static_cast<int>(red.rows.size());
  int lp_size = 2 * (nrows + static_cast<int>(lp_const.size()));
  int nblocks = prob.num_blocks() + (lp_size > 0 ? 1 : 0);

  os << "\" produced by umos: reduced LMI form, equalities as paired diagonal entries\n";
  os << red.n_red << " = mDIM\n";
  os << nblocks << " = nBLOCK\n";
  for (int j = 0; j < prob.num_blocks(); ++j) os << prob.block_sides[j] << " ";
  if (lp_size > 0) os << -lp_size;
  os << "\n";
  for (int v = 0; v < red.n_red; ++v) os << fmt(red.c(v)) << (v + 1 < red.n_red ? " " : "");
  os << "\n";

  auto entry = [&os](int mat, int blk, int i, int j, double v) {
    if (v == 0.0) return;
    os << mat << " " << blk << " " << i << " " << j << " " << fmt(v) << "\n";
  };

  for (int j = 0; j < prob.num_blocks(); ++j) {
    int side = prob.block_sides[j];
    const Eigen::MatrixXd& G = red.const_G[j];
    for (int r = 0; r < side; ++r)
      for (int c = r; c < side; ++c) entry(0, j + 1, r + 1, c + 1, -G(r, c));
    if (const detail::RedBlock* blk = by_orig[j]) {
      for (size_t t = 0; t < blk->vars.size(); ++t)
        for (const auto& ec : blk->var_coefs[t])
          entry(blk->vars[t] + 1, j + 1, ec.r + 1, ec.c + 1, ec.v);
    }
  }
  if (lp_size > 0) {
    int lpblk = prob.num_blocks() + 1;
    for (int i = 0; i < nrows; ++i) {
      const auto& row = red.rows[i];
      int p = 2 * i + 1, q = 2 * i + 2;
      entry(0, lpblk, p, p, row.rhs);
      entry(0, lpblk, q, q, -row.rhs);
      for (const auto& [v, a] : row.terms) {
        entry(v + 1, lpblk, p, p, a);
        entry(v + 1, lpblk, q, q, -a);
      }
    }
    for (size_t t = 0; t < lp_const.size(); ++t) {
      int p = 2 * nrows + 2 * static_cast<int>(t) + 1;
      entry(0, lpblk, p, p, lp_const[t].second);
      entry(0, lpblk, p + 1, p + 1, -lp_const[t].second);
    }
  }
}

void write_sdpa_file(const SDPProblem& prob, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_sdpa(prob, os);
  if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace umos
