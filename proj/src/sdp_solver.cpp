#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <utility>
#include <vector>

#include "sdp_reduction.hpp"
#include "umos/sdp.hpp"

namespace umos {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using detail::RedBlock;
using detail::Reduction;

namespace {

MatrixXd assemble_p(const RedBlock& blk, const VectorXd& g) {
  MatrixXd M = MatrixXd::Zero(blk.side, blk.side);
  for (size_t i = 0; i < blk.vars.size(); ++i) {
    double uv = g(blk.vars[i]);
    if (uv == 0.0) continue;
    for (const auto& ec : blk.var_coefs[i]) {
      M(ec.r, ec.c) += ec.v * uv;
      if (ec.r != ec.c) M(ec.c, ec.r) += ec.v * uv;
    }
  }
  return M;
}

void p_adjoint_accum(const RedBlock& blk, const MatrixXd& M, VectorXd& out) {
  for (size_t i = 0; i < blk.vars.size(); ++i) {
    double acc = 0.0;
    for (const auto& ec : blk.var_coefs[i])
      acc += ec.v * (ec.r == ec.c ? M(ec.r, ec.c) : 2.0 * M(ec.r, ec.c));
    out(blk.vars[i]) += acc;
  }
}

struct BlockState {
  const RedBlock* def = nullptr;
  int s = 0;
  MatrixXd X, Z, Rx;
  MatrixXd Lx, Lz, Gs, Gi, Winv;  // Gi = Gs^{-1}, W^{-1} = Gi^T Gi
  VectorXd d;
  MatrixXd RxS, Psi;  // Gi Rx Gi^T and the scaled corrector target
  MatrixXd dX, dZ;    // corrector direction
  MatrixXd dXa, dZa;  // predictor direction
  MatrixXd dXsA;      // Gi dXa Gi^T, reused by the corrector
};

// One component of the regularized KKT system
//
//   [H + dI  A^T  B^T] [du]   [r1]
//   [A       -dI     ] [w ] = [rp]
//   [B            -dI] [wB]   [rB]   (border rows, shared across components)
//
// solved by eliminating du, then w, then wB through two Schur levels.
struct CompKKT {
  std::vector<int> vars;    // global reduced var ids
  std::vector<int> rows;    // global row ids local to this component
  std::vector<int> blocks;  // block state indices
  int n = 0, m = 0, nB = 0;
  MatrixXd A;              // m x n
  MatrixXd Bt;             // n x nB
  MatrixXd H;
  Eigen::LLT<MatrixXd> F, Ms;
  MatrixXd Y;              // F^{-1} A^T
  MatrixXd TB, NB;         // F^{-1} B^T,  A F^{-1} B^T
  MatrixXd schur_contrib;  // B (H~ + A^T A/d)^{-1} B^T
  VectorXd t1, w0, du0;

  bool factor(double delta) {
    MatrixXd Ht = H;
    Ht.diagonal().array() += delta;
    F.compute(Ht);
    if (F.info() != Eigen::Success) return false;
    if (m > 0) {
      Y = F.solve(A.transpose());
      MatrixXd S = A * Y;
      S.diagonal().array() += delta;
      Ms.compute(S);
      if (Ms.info() != Eigen::Success) return false;
    }
    if (nB > 0) {
      TB = F.solve(Bt);
      if (m > 0) {
        NB = A * TB;
        schur_contrib = Bt.transpose() * TB - NB.transpose() * Ms.solve(NB);
      } else {
        schur_contrib = Bt.transpose() * TB;
      }
    }
    return true;
  }

  void stage1(const VectorXd& r1c, const VectorXd& rpc) {
    t1 = F.solve(r1c);
    if (m > 0) {
      w0 = Ms.solve(A * t1 - rpc);
      du0 = t1 - Y * w0;
    } else {
      w0.resize(0);
      du0 = t1;
    }
  }

  void stage2(const VectorXd& wB, VectorXd& du, VectorXd& w) const {
    if (nB == 0) {
      du = du0;
      w = w0;
      return;
    }
    if (m > 0) {
      w = w0 - Ms.solve(NB * wB);
      du = t1 - Y * w - TB * wB;
    } else {
      w.resize(0);
      du = t1 - TB * wB;
    }
  }
};

double min_scaled_eig(const MatrixXd& L, const MatrixXd& dS) {
  MatrixXd T = L.triangularView<Eigen::Lower>().solve(dS);
  T = L.triangularView<Eigen::Lower>().solve(MatrixXd(T.transpose()));
  MatrixXd S = 0.5 * (T + T.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double step_length(const MatrixXd& L, const MatrixXd& dS, double eta) {
  double lam = min_scaled_eig(L, dS);
  if (lam >= -1e-13) return 1.0;
  return std::min(1.0, -eta / lam);
}

struct Iterate {
  VectorXd u, nu;
  std::vector<MatrixXd> X, Z;
  double merit = std::numeric_limits<double>::infinity();
  double pobj = 0, dobj = 0;
};

// Maps duals of the reduced rows back onto the original equality rows.  A row
// that pinned a matrix entry recovers its dual from stationarity of that
// entry:  sum_i nu_i gamma_i + (2 - delta_rc) Z(r,c) = w(r,c).
void recover_row_duals(const SDPProblem& prob, const Reduction& red, const VectorXd& nu_red,
                       const std::vector<MatrixXd>& Zorig, bool farkas, VectorXd& eq_duals) {
  eq_duals = VectorXd::Zero(static_cast<Eigen::Index>(prob.equalities.size()));
  for (size_t i = 0; i < red.rows.size(); ++i)
    eq_duals(red.rows[i].orig_row) = nu_red(static_cast<Eigen::Index>(i));
  for (int j = 0; j < prob.num_blocks(); ++j) {
    int side = prob.block_sides[j];
    for (int r = 0; r < side; ++r)
      for (int c = r; c < side; ++c) {
        int id = detail::tri_id(side, r, c);
        const auto& pin = red.entry_pin[j][id];
        if (pin.row < 0) continue;
        double w = farkas ? 0.0 : red.obj_entry_coef[j][id];
        double acc = w - (r == c ? 1.0 : 2.0) * Zorig[j](r, c);
        for (const auto& [row, gamma] : red.entry_refs[j][id])
          acc -= eq_duals(row) * gamma;
        eq_duals(pin.row) = acc / pin.coef;
      }
  }
}

// residual of A^* nu + P^*(Z) = 0 in the original problem data (Farkas form)
double original_stationarity_residual(const SDPProblem& prob, const VectorXd& eq_duals,
                                      const std::vector<MatrixXd>& Z) {
  double res = 0.0;
  VectorXd freev = VectorXd::Zero(prob.num_free);
  std::vector<MatrixXd> ent(prob.num_blocks());
  for (int j = 0; j < prob.num_blocks(); ++j)
    ent[j] = MatrixXd::Zero(prob.block_sides[j], prob.block_sides[j]);
  for (size_t i = 0; i < prob.equalities.size(); ++i) {
    const auto& row = prob.equalities[i];
    double nui = eq_duals(static_cast<Eigen::Index>(i));
    for (const auto& t : row.frees) freev(t.var) += nui * t.coef;
    for (const auto& t : row.entries) ent[t.block](t.row, t.col) += nui * t.coef;
  }
  if (prob.num_free > 0) res = freev.lpNorm<Eigen::Infinity>();
  for (int j = 0; j < prob.num_blocks(); ++j) {
    int side = prob.block_sides[j];
    for (int r = 0; r < side; ++r)
      for (int c = r; c < side; ++c) {
        double z = (r == c ? 1.0 : 2.0) * Z[j](r, c);
        res = std::max(res, std::abs(ent[j](r, c) + z));
      }
  }
  return res;
}

double rhs_dot(const SDPProblem& prob, const VectorXd& eq_duals) {
  double acc = 0.0;
  for (size_t i = 0; i < prob.equalities.size(); ++i)
    acc += eq_duals(static_cast<Eigen::Index>(i)) * prob.equalities[i].rhs;
  return acc;
}

SDPSolution presolve_infeasible(const SDPProblem& prob, const Reduction& red) {
  SDPSolution sol;
  sol.status = SolveStatus::PrimalInfeasible;
  sol.free_values = VectorXd::Zero(prob.num_free);
  sol.block_values.resize(prob.num_blocks());
  sol.block_duals.resize(prob.num_blocks());
  for (int j = 0; j < prob.num_blocks(); ++j) {
    sol.block_values[j] = red.const_G[j];
    sol.block_duals[j] = MatrixXd::Zero(prob.block_sides[j], prob.block_sides[j]);
  }
  if (red.infeasible_row >= 0) {
    // a row all of whose matrix entries were pinned reduced to 0 = rhs, rhs != 0
    sol.eq_duals = VectorXd::Zero(static_cast<Eigen::Index>(prob.equalities.size()));
    const auto& row = prob.equalities[red.infeasible_row];
    double rhs = row.rhs;
    for (const auto& t : row.entries) {
      int id = detail::tri_id(prob.block_sides[t.block], t.row, t.col);
      rhs -= t.coef * red.entry_expr[t.block][id].constant;
    }
    double s = (rhs > 0 ? 1.0 : -1.0) / std::abs(rhs);
    sol.eq_duals(red.infeasible_row) = s;
    // cancel the pinned entries it references through their pinning rows
    for (const auto& t : row.entries) {
      int id = detail::tri_id(prob.block_sides[t.block], t.row, t.col);
      const auto& pin = red.entry_pin[t.block][id];
      if (pin.row >= 0) sol.eq_duals(pin.row) += -s * t.coef / pin.coef;
    }
  } else {
    // a fully constant block that is not positive semidefinite
    int jworst = -1;
    double lam = 0.0;
    VectorXd v;
    for (int cb : red.const_blocks) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(red.const_G[cb]);
      if (jworst < 0 || es.eigenvalues()(0) < lam) {
        jworst = cb;
        lam = es.eigenvalues()(0);
        v = es.eigenvectors().col(0);
      }
    }
    sol.block_duals[jworst] = v * v.transpose() / (-lam);
    VectorXd none = VectorXd::Zero(static_cast<Eigen::Index>(red.rows.size()));
    recover_row_duals(prob, red, none, sol.block_duals, true, sol.eq_duals);
  }
  sol.certificate_residual = original_stationarity_residual(prob, sol.eq_duals, sol.block_duals);
  sol.primal_obj = std::numeric_limits<double>::quiet_NaN();
  sol.dual_obj = rhs_dot(prob, sol.eq_duals);
  return sol;
}

// Degenerate problem with no variable-dependent PSD blocks: a linear program
// over an affine subspace, handled directly by orthogonal decompositions.
SDPSolution solve_no_blocks(const SDPProblem& prob, const Reduction& red) {
  SDPSolution sol;
  sol.free_values = VectorXd::Zero(prob.num_free);
  sol.block_values.resize(prob.num_blocks());
  sol.block_duals.resize(prob.num_blocks());
  for (int j = 0; j < prob.num_blocks(); ++j) {
    sol.block_values[j] = red.const_G[j];
    sol.block_duals[j] = MatrixXd::Zero(prob.block_sides[j], prob.block_sides[j]);
  }
  const int m = static_cast<int>(red.rows.size());
  const int n = red.n_red;
  MatrixXd A = MatrixXd::Zero(m, n);
  VectorXd d(m);
  for (int i = 0; i < m; ++i) {
    for (const auto& [v, a] : red.rows[i].terms) A(i, v) = a;
    d(i) = red.rows[i].rhs;
  }
  VectorXd u = VectorXd::Zero(n);
  VectorXd nu_red = VectorXd::Zero(m);
  if (m > 0) {
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(A);
    u = cod.solve(d);
    VectorXd resid = d - A * u;
    if (resid.lpNorm<Eigen::Infinity>() > 1e-9 * (1.0 + d.lpNorm<Eigen::Infinity>())) {
      sol.status = SolveStatus::PrimalInfeasible;
      VectorXd nu = resid / resid.dot(d);  // A^T resid = 0 and resid . d = |resid|^2 > 0
      recover_row_duals(prob, red, nu, sol.block_duals, true, sol.eq_duals);
      sol.certificate_residual =
          original_stationarity_residual(prob, sol.eq_duals, sol.block_duals);
      sol.primal_obj = std::numeric_limits<double>::quiet_NaN();
      sol.dual_obj = rhs_dot(prob, sol.eq_duals);
      return sol;
    }
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> codT(MatrixXd(A.transpose()));
    nu_red = codT.solve(red.c);
    VectorXd dres = red.c - A.transpose() * nu_red;
    if (dres.lpNorm<Eigen::Infinity>() > 1e-9 * (1.0 + red.c.lpNorm<Eigen::Infinity>())) {
      sol.status = SolveStatus::DualInfeasible;
      sol.primal_obj = -std::numeric_limits<double>::infinity();
      sol.dual_obj = -std::numeric_limits<double>::infinity();
      sol.eq_duals = VectorXd::Zero(static_cast<Eigen::Index>(prob.equalities.size()));
      return sol;
    }
  } else if (red.c.size() > 0 && red.c.lpNorm<Eigen::Infinity>() > 1e-12) {
    sol.status = SolveStatus::DualInfeasible;
    sol.primal_obj = -std::numeric_limits<double>::infinity();
    sol.dual_obj = -std::numeric_limits<double>::infinity();
    sol.eq_duals = VectorXd::Zero(static_cast<Eigen::Index>(prob.equalities.size()));
    return sol;
  }
  sol.status = SolveStatus::Optimal;
  for (int v = 0; v < prob.num_free; ++v) sol.free_values(v) = u(v);
  auto X = detail::recover_block_values(prob, red, u);
  for (int j = 0; j < prob.num_blocks(); ++j) sol.block_values[j] = X[j];
  sol.primal_obj = red.c.dot(u) + red.c0;
  sol.dual_obj = (m > 0 ? d.dot(nu_red) : 0.0) + red.c0;
  sol.primal_infeasibility = 0.0;
  sol.dual_infeasibility = 0.0;
  recover_row_duals(prob, red, nu_red, sol.block_duals, false, sol.eq_duals);
  return sol;
}

}  // namespace

SDPSolution solve(const SDPProblem& prob, const SolverSettings& settings) {
  Reduction red = detail::reduce(prob);

  for (int cb : red.const_blocks) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(red.const_G[cb], Eigen::EigenvaluesOnly);
    double scale = 1.0 + red.const_G[cb].cwiseAbs().maxCoeff();
    if (es.eigenvalues()(0) < -1e-9 * scale) {
      red.infeasible_row = -1;
      return presolve_infeasible(prob, red);
    }
  }
  if (red.trivially_infeasible) return presolve_infeasible(prob, red);
  if (red.blocks.empty()) return solve_no_blocks(prob, red);

  const int n = red.n_red;
  const int nrows = static_cast<int>(red.rows.size());
  const int nblk = static_cast<int>(red.blocks.size());
  const int nB = static_cast<int>(red.border_rows.size());

  std::vector<BlockState> bs(nblk);
  double gscale = 0.0;
  for (int b = 0; b < nblk; ++b) {
    bs[b].def = &red.blocks[b];
    bs[b].s = red.blocks[b].side;
    gscale = std::max(gscale, red.blocks[b].G.size()
                                  ? red.blocks[b].G.cwiseAbs().maxCoeff()
                                  : 0.0);
  }

  std::vector<CompKKT> comps(red.n_comps);
  for (int c = 0; c < red.n_comps; ++c) {
    CompKKT& K = comps[c];
    K.vars = red.comp_vars[c];
    K.rows = red.comp_rows[c];
    K.n = static_cast<int>(K.vars.size());
    K.m = static_cast<int>(K.rows.size());
    K.nB = nB;
    K.A = MatrixXd::Zero(K.m, K.n);
    for (int i = 0; i < K.m; ++i)
      for (const auto& [v, a] : red.rows[K.rows[i]].terms) K.A(i, red.var_local[v]) = a;
    K.Bt = MatrixXd::Zero(K.n, nB);
    for (int i = 0; i < nB; ++i)
      for (const auto& [v, a] : red.rows[red.border_rows[i]].terms)
        if (red.var_comp[v] == c) K.Bt(red.var_local[v], i) = a;
  }
  for (int b = 0; b < nblk; ++b) comps[red.blocks[b].comp].blocks.push_back(b);

  VectorXd u = VectorXd::Zero(n);
  VectorXd nu = VectorXd::Zero(nrows);
  double cscale = red.c.size() ? red.c.lpNorm<Eigen::Infinity>() : 0.0;
  for (int b = 0; b < nblk; ++b) {
    bs[b].X = 10.0 * (1.0 + gscale) * MatrixXd::Identity(bs[b].s, bs[b].s);
    bs[b].Z = 10.0 * (1.0 + cscale) * MatrixXd::Identity(bs[b].s, bs[b].s);
  }

  double rhs_scale = 1.0 + gscale;
  for (int i = 0; i < nrows; ++i) rhs_scale = std::max(rhs_scale, std::abs(red.rows[i].rhs));
  double obj_scale = 1.0 + cscale;
  double total_side = 0.0;
  for (int b = 0; b < nblk; ++b) total_side += bs[b].s;

  Iterate best;
  SDPSolution sol;
  sol.block_values.resize(prob.num_blocks());
  sol.block_duals.resize(prob.num_blocks());
  sol.status = SolveStatus::MaxIters;

  auto row_apply = [&](const VectorXd& g) {
    VectorXd out(nrows);
    for (int i = 0; i < nrows; ++i) {
      double acc = 0.0;
      for (const auto& [v, a] : red.rows[i].terms) acc += a * g(v);
      out(i) = acc;
    }
    return out;
  };
  auto row_adjoint = [&](const VectorXd& w) {
    VectorXd out = VectorXd::Zero(n);
    for (int i = 0; i < nrows; ++i)
      for (const auto& [v, a] : red.rows[i].terms) out(v) += a * w(i);
    return out;
  };
  auto h_apply = [&](const VectorXd& g) {
    VectorXd out = VectorXd::Zero(n);
    for (int b = 0; b < nblk; ++b) {
      MatrixXd T = bs[b].Winv * assemble_p(*bs[b].def, g) * bs[b].Winv;
      p_adjoint_accum(*bs[b].def, T, out);
    }
    return out;
  };

  double delta = 1e-11;

  // regularized KKT solve with iterative refinement against the
  // unregularized system
  auto kkt_solve = [&](const VectorXd& r1v, const VectorXd& rpv, int refine, VectorXd& du,
                       VectorXd& w) {
    du = VectorXd::Zero(n);
    w = VectorXd::Zero(nrows);
    VectorXd q1 = r1v, q2 = rpv;
    for (int pass = 0; pass <= refine; ++pass) {
      MatrixXd SB = MatrixXd::Zero(nB, nB);
      VectorXd rhsB = VectorXd::Zero(nB);
      for (auto& K : comps) {
        VectorXd r1c(K.n), rpc(K.m);
        for (int i = 0; i < K.n; ++i) r1c(i) = q1(K.vars[i]);
        for (int i = 0; i < K.m; ++i) rpc(i) = q2(K.rows[i]);
        K.stage1(r1c, rpc);
        if (nB > 0) {
          SB += K.schur_contrib;
          rhsB += K.Bt.transpose() * K.du0;
        }
      }
      VectorXd wB;
      if (nB > 0) {
        for (int i = 0; i < nB; ++i) rhsB(i) -= q2(red.border_rows[i]);
        SB.diagonal().array() += delta;
        wB = SB.llt().solve(rhsB);
      }
      for (auto& K : comps) {
        VectorXd duc, wc;
        K.stage2(wB, duc, wc);
        for (int i = 0; i < K.n; ++i) du(K.vars[i]) += duc(i);
        for (int i = 0; i < K.m; ++i) w(K.rows[i]) += wc(i);
      }
      for (int i = 0; i < nB; ++i) w(red.border_rows[i]) += wB(i);
      if (pass < refine) {
        q1 = r1v - (h_apply(du) + row_adjoint(w));
        q2 = rpv - row_apply(du);
      }
    }
  };

  int tiny_steps = 0;
  int iter = 0;
  bool numerical_failure = false;
  VectorXd rp(nrows), rd(n);

  // rounding near the terminal iterations can push X or Z marginally across
  // the cone boundary; lifting the spectrum back above a relative floor lets
  // the iteration continue instead of aborting at a still-useful gap
  int repairs = 0;
  auto repair_cone = [&]() {
    for (int b = 0; b < nblk; ++b)
      for (MatrixXd* M : {&bs[b].X, &bs[b].Z}) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(*M);
        const VectorXd& ev = es.eigenvalues();
        const double floor_v = 1e-12 * std::max(1.0, ev(ev.size() - 1));
        if (ev(0) < floor_v)
          *M = es.eigenvectors() * ev.cwiseMax(floor_v).asDiagonal() *
               es.eigenvectors().transpose();
      }
  };

  for (; iter < settings.max_iters; ++iter) {
    rp = -row_apply(u);
    for (int i = 0; i < nrows; ++i) rp(i) += red.rows[i].rhs;
    rd = red.c - row_adjoint(nu);
    double rx_norm = 0.0;
    for (int b = 0; b < nblk; ++b) {
      bs[b].Rx = bs[b].def->G + assemble_p(*bs[b].def, u) - bs[b].X;
      p_adjoint_accum(*bs[b].def, -bs[b].Z, rd);
      rx_norm = std::max(rx_norm, bs[b].Rx.cwiseAbs().maxCoeff());
    }
    double mu = 0.0, gdotz = 0.0;
    for (int b = 0; b < nblk; ++b) {
      mu += bs[b].X.cwiseProduct(bs[b].Z).sum();
      gdotz += bs[b].def->G.cwiseProduct(bs[b].Z).sum();
    }
    mu /= total_side;
    double pobj = red.c.dot(u) + red.c0;
    double dnu = 0.0;
    for (int i = 0; i < nrows; ++i) dnu += red.rows[i].rhs * nu(i);
    double dobj = dnu - gdotz + red.c0;
    double pinf = std::max(nrows ? rp.lpNorm<Eigen::Infinity>() : 0.0, rx_norm) / rhs_scale;
    double dinf = rd.lpNorm<Eigen::Infinity>() / obj_scale;
    double gap = std::abs(pobj - dobj) / (1.0 + std::max(std::abs(pobj), std::abs(dobj)));
    double merit = std::max({pinf, dinf, gap});

    if (!std::isfinite(merit) || mu <= 0.0) {
      if (std::isfinite(merit) && repairs < 3) {
        ++repairs;
        repair_cone();
        continue;
      }
      numerical_failure = true;
      break;
    }
    if (merit < best.merit) {
      best.merit = merit;
      best.u = u;
      best.nu = nu;
      best.X.resize(nblk);
      best.Z.resize(nblk);
      for (int b = 0; b < nblk; ++b) {
        best.X[b] = bs[b].X;
        best.Z[b] = bs[b].Z;
      }
      best.pobj = pobj;
      best.dobj = dobj;
    }
    if (settings.verbose)
      std::cerr << "iter " << iter << "  mu " << mu << "  pinf " << pinf << "  dinf " << dinf
                << "  gap " << gap << "  pobj " << pobj << "  dobj " << dobj << "\n";
    if (pinf <= settings.feas_tol && dinf <= settings.feas_tol && gap <= settings.gap_tol) {
      sol.status = SolveStatus::Optimal;
      break;
    }

    // Farkas test for primal infeasibility: the dual improving ray satisfies
    // A^* nu + P^*(Z) ~ 0 with d.nu - <G,Z> > 0
    double rho = dnu - gdotz;
    if (rho > 1e-6 * rhs_scale) {
      VectorXd statn = row_adjoint(nu);
      for (int b = 0; b < nblk; ++b) p_adjoint_accum(*bs[b].def, bs[b].Z, statn);
      double cres = statn.lpNorm<Eigen::Infinity>();
      if (cres <= settings.infeasibility_threshold * rho) {
        sol.status = SolveStatus::PrimalInfeasible;
        VectorXd nu_s = nu / rho;
        std::vector<MatrixXd> Zorig(prob.num_blocks());
        for (int j = 0; j < prob.num_blocks(); ++j)
          Zorig[j] = MatrixXd::Zero(prob.block_sides[j], prob.block_sides[j]);
        for (int b = 0; b < nblk; ++b) Zorig[bs[b].def->orig_block] = bs[b].Z / rho;
        recover_row_duals(prob, red, nu_s, Zorig, true, sol.eq_duals);
        sol.block_duals = Zorig;
        sol.block_values = detail::recover_block_values(prob, red, u);
        sol.free_values = u.head(prob.num_free);
        sol.certificate_residual =
            original_stationarity_residual(prob, sol.eq_duals, sol.block_duals);
        sol.primal_obj = std::numeric_limits<double>::quiet_NaN();
        sol.dual_obj = rhs_dot(prob, sol.eq_duals);
        sol.iterations = iter;
        return sol;
      }
    }

    // unbounded-below (dual infeasibility) ray test
    double unorm = u.lpNorm<Eigen::Infinity>();
    if (unorm > 1e9) {
      VectorXd uh = u / unorm;
      bool ray = red.c.dot(uh) < -1e-8 && row_apply(uh).lpNorm<Eigen::Infinity>() < 1e-8;
      for (int b = 0; ray && b < nblk; ++b) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(assemble_p(*bs[b].def, uh),
                                                   Eigen::EigenvaluesOnly);
        ray = es.eigenvalues()(0) > -1e-8;
      }
      if (ray) {
        sol.status = SolveStatus::DualInfeasible;
        sol.free_values = uh.head(prob.num_free);
        sol.block_values = detail::recover_block_values(prob, red, uh);
        for (int j = 0; j < prob.num_blocks(); ++j)
          sol.block_duals[j] = MatrixXd::Zero(prob.block_sides[j], prob.block_sides[j]);
        sol.eq_duals = VectorXd::Zero(static_cast<Eigen::Index>(prob.equalities.size()));
        sol.primal_obj = -std::numeric_limits<double>::infinity();
        sol.dual_obj = -std::numeric_limits<double>::infinity();
        sol.iterations = iter;
        return sol;
      }
    }

    // Nesterov-Todd scaling per block
    bool scale_ok = true;
    for (int b = 0; b < nblk && scale_ok; ++b) {
      BlockState& B = bs[b];
      Eigen::LLT<MatrixXd> cx(B.X), cz(B.Z);
      if (cx.info() != Eigen::Success || cz.info() != Eigen::Success) {
        scale_ok = false;
        break;
      }
      B.Lx = cx.matrixL();
      B.Lz = cz.matrixL();
      Eigen::BDCSVD<MatrixXd> svd(B.Lz.transpose() * B.Lx,
                                  Eigen::ComputeFullU | Eigen::ComputeFullV);
      B.d = svd.singularValues().cwiseMax(1e-150);
      VectorXd dis = B.d.cwiseSqrt().cwiseInverse();
      B.Gs = B.Lx * svd.matrixV() * dis.asDiagonal();
      B.Gi = dis.asDiagonal() * svd.matrixU().transpose() * B.Lz.transpose();
      B.Winv = B.Gi.transpose() * B.Gi;
    }
    if (!scale_ok) {
      if (repairs < 3) {
        ++repairs;
        repair_cone();
        continue;
      }
      numerical_failure = true;
      break;
    }

    // H_{tt'} = sum_blocks <P_t, W^{-1} P_t' W^{-1}>, assembled per component
    for (auto& K : comps) {
      K.H = MatrixXd::Zero(K.n, K.n);
      for (int b : K.blocks) {
        const RedBlock& blk = *bs[b].def;
        const MatrixXd& Wi = bs[b].Winv;
        int nt = static_cast<int>(blk.vars.size());
        MatrixXd T(blk.side, blk.side);
        for (int ti = 0; ti < nt; ++ti) {
          T.setZero();
          for (const auto& ec : blk.var_coefs[ti]) {
            T.noalias() += ec.v * (Wi.col(ec.r) * Wi.col(ec.c).transpose());
            if (ec.r != ec.c) T.noalias() += ec.v * (Wi.col(ec.c) * Wi.col(ec.r).transpose());
          }
          int li = red.var_local[blk.vars[ti]];
          for (int tj = ti; tj < nt; ++tj) {
            double acc = 0.0;
            for (const auto& ec : blk.var_coefs[tj])
              acc += ec.v * (ec.r == ec.c ? T(ec.r, ec.c) : 2.0 * T(ec.r, ec.c));
            int lj = red.var_local[blk.vars[tj]];
            K.H(li, lj) += acc;
            if (li != lj) K.H(lj, li) += acc;
          }
        }
      }
    }
    bool factored = false;
    while (!factored) {
      factored = true;
      for (auto& K : comps)
        if (!K.factor(delta)) {
          factored = false;
          break;
        }
      if (!factored) {
        delta *= 1e3;
        if (delta > 1e-2) {
          numerical_failure = true;
          break;
        }
      }
    }
    if (numerical_failure) break;

    // predictor: target Phi = -X.  Scaled identities Gi X Gi^T = diag(d) and
    // Gi^T(..)Gi half-sandwiches keep the terminal iterations from drowning
    // in W^{-1} cancellation.
    VectorXd r1a = -rd;
    for (int b = 0; b < nblk; ++b) {
      BlockState& B = bs[b];
      B.RxS = B.Gi * B.Rx * B.Gi.transpose();
      MatrixXd Ts = -B.RxS;
      Ts.diagonal() -= B.d;
      p_adjoint_accum(*B.def, MatrixXd(B.Gi.transpose() * Ts * B.Gi), r1a);
    }
    VectorXd dua, wa;
    kkt_solve(r1a, rp, 0, dua, wa);
    double apa = 1.0, ada = 1.0;
    for (int b = 0; b < nblk; ++b) {
      BlockState& B = bs[b];
      B.dXa = assemble_p(*B.def, dua) + B.Rx;
      B.dXsA = B.Gi * B.dXa * B.Gi.transpose();
      MatrixXd Zs = -B.dXsA;
      Zs.diagonal() -= B.d;
      B.dZa = B.Gi.transpose() * Zs * B.Gi;
      apa = std::min(apa, step_length(B.Lx, B.dXa, 0.999));
      ada = std::min(ada, step_length(B.Lz, B.dZa, 0.999));
    }
    double mua = 0.0;
    for (int b = 0; b < nblk; ++b)
      mua += (bs[b].X + apa * bs[b].dXa).cwiseProduct(bs[b].Z + ada * bs[b].dZa).sum();
    mua /= total_side;
    double sigma = std::clamp(std::pow(std::max(mua, 0.0) / mu, 3.0), 1e-8, 1.0);

    // corrector with Mehrotra second-order term, in scaled space where the
    // predictor satisfies dZs = -diag(d) - dXs exactly
    VectorXd r1c = -rd;
    for (int b = 0; b < nblk; ++b) {
      BlockState& B = bs[b];
      MatrixXd dZs = -B.dXsA;
      dZs.diagonal() -= B.d;
      MatrixXd Theta = -0.5 * (B.dXsA * dZs + dZs * B.dXsA);
      Theta.diagonal().array() += sigma * mu;
      Theta.diagonal() -= B.d.cwiseProduct(B.d);
      B.Psi.resize(B.s, B.s);
      for (int i = 0; i < B.s; ++i)
        for (int j = 0; j < B.s; ++j) B.Psi(i, j) = 2.0 * Theta(i, j) / (B.d(i) + B.d(j));
      p_adjoint_accum(*B.def, MatrixXd(B.Gi.transpose() * (B.Psi - B.RxS) * B.Gi), r1c);
    }
    VectorXd du, w;
    kkt_solve(r1c, rp, 2, du, w);
    double ap = 1.0, ad = 1.0;
    const double eta = merit < 1e-4 ? 0.995 : 0.98;
    for (int b = 0; b < nblk; ++b) {
      BlockState& B = bs[b];
      B.dX = assemble_p(*B.def, du) + B.Rx;
      B.dZ = B.Gi.transpose() * (B.Psi - B.Gi * B.dX * B.Gi.transpose()) * B.Gi;
      ap = std::min(ap, step_length(B.Lx, B.dX, eta));
      ad = std::min(ad, step_length(B.Lz, B.dZ, eta));
    }
    if (!std::isfinite(ap) || !std::isfinite(ad)) {
      numerical_failure = true;
      break;
    }
    u += ap * du;
    nu -= ad * w;
    for (int b = 0; b < nblk; ++b) {
      bs[b].X += ap * bs[b].dX;
      bs[b].Z += ad * bs[b].dZ;
    }
    tiny_steps = (std::max(ap, ad) < 1e-7) ? tiny_steps + 1 : 0;
    if (tiny_steps >= 4) {
      numerical_failure = true;
      break;
    }
  }

  if (best.u.size() == 0) {
    sol.status = SolveStatus::NumericalFailure;
    sol.free_values = VectorXd::Zero(prob.num_free);
    sol.eq_duals = VectorXd::Zero(static_cast<Eigen::Index>(prob.equalities.size()));
    for (int j = 0; j < prob.num_blocks(); ++j) {
      sol.block_values[j] = red.const_G[j];
      sol.block_duals[j] = MatrixXd::Zero(prob.block_sides[j], prob.block_sides[j]);
    }
    sol.iterations = iter;
    return sol;
  }
  // dual polish: with Z fixed at the best iterate, refit nu by least squares
  // against the stationarity condition A^T nu = c - P^*(Z)
  {
    VectorXd target = red.c;
    for (int b = 0; b < nblk; ++b) p_adjoint_accum(*bs[b].def, -best.Z[b], target);
    if (nrows > 0) {
      std::vector<std::vector<std::pair<int, double>>> by_var(static_cast<std::size_t>(n));
      for (int i = 0; i < nrows; ++i)
        for (const auto& [v, a] : red.rows[i].terms)
          by_var[static_cast<std::size_t>(v)].push_back({i, a});
      MatrixXd AAT = MatrixXd::Zero(nrows, nrows);
      for (const auto& col : by_var)
        for (std::size_t p = 0; p < col.size(); ++p)
          for (std::size_t q = p; q < col.size(); ++q) {
            AAT(col[p].first, col[q].first) += col[p].second * col[q].second;
            if (p != q) AAT(col[q].first, col[p].first) += col[p].second * col[q].second;
          }
      AAT.diagonal().array() += 1e-12 * (1.0 + AAT.diagonal().maxCoeff());
      VectorXd nu_p = AAT.ldlt().solve(row_apply(target));
      if ((target - row_adjoint(nu_p)).lpNorm<Eigen::Infinity>() <
          (target - row_adjoint(best.nu)).lpNorm<Eigen::Infinity>())
        best.nu = nu_p;
    }
    double dnu = 0.0, gdotz = 0.0;
    for (int i = 0; i < nrows; ++i) dnu += red.rows[i].rhs * best.nu(i);
    for (int b = 0; b < nblk; ++b) gdotz += bs[b].def->G.cwiseProduct(best.Z[b]).sum();
    best.dobj = dnu - gdotz + red.c0;
    double pinf = 0.0;
    VectorXd rpb = row_apply(best.u);
    for (int i = 0; i < nrows; ++i) pinf = std::max(pinf, std::abs(red.rows[i].rhs - rpb(i)));
    for (int b = 0; b < nblk; ++b)
      pinf = std::max(pinf, (bs[b].def->G + assemble_p(*bs[b].def, best.u) - best.X[b])
                                .cwiseAbs()
                                .maxCoeff());
    double dinf = (target - row_adjoint(best.nu)).lpNorm<Eigen::Infinity>() / obj_scale;
    double gap = std::abs(best.pobj - best.dobj) /
                 (1.0 + std::max(std::abs(best.pobj), std::abs(best.dobj)));
    best.merit = std::max({pinf / rhs_scale, dinf, gap});
    sol.primal_infeasibility = pinf / rhs_scale;
    sol.dual_infeasibility = dinf;
  }
  if (sol.status != SolveStatus::Optimal) {
    if (best.merit <= settings.accept_tol)
      sol.status = SolveStatus::Optimal;
    else if (numerical_failure)
      sol.status = SolveStatus::NumericalFailure;
  }

  std::vector<MatrixXd> Zorig(prob.num_blocks());
  for (int j = 0; j < prob.num_blocks(); ++j)
    Zorig[j] = MatrixXd::Zero(prob.block_sides[j], prob.block_sides[j]);
  for (int b = 0; b < nblk; ++b) Zorig[bs[b].def->orig_block] = best.Z[b];
  sol.block_values = detail::recover_block_values(prob, red, best.u);
  for (int b = 0; b < nblk; ++b) sol.block_values[bs[b].def->orig_block] = best.X[b];
  sol.block_duals = Zorig;
  sol.free_values = best.u.head(prob.num_free);
  recover_row_duals(prob, red, best.nu, Zorig, false, sol.eq_duals);
  sol.primal_obj = best.pobj;
  sol.dual_obj = best.dobj;
  sol.iterations = iter;
  return sol;
}

}  // namespace umos
