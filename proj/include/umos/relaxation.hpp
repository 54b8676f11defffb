#pragma once

// Moment relaxations for minimizing a polynomial over a union of basic
// closed semialgebraic sets, and recovery of the dual sum-of-squares
// certificate.
//
// The order-k relaxation introduces one truncated moment sequence y^(l) of
// degree 2k per set.  Per set it carries a moment matrix block M_k[y^(l)],
// a localizing block per inequality, and linear rows forcing the localizing
// vector of every equality to vanish.  A single coupling row sum_l y^(l)_0 = 1
// ties the pieces together; the objective is sum_l <f, y^(l)>.

#include <Eigen/Dense>

#include <vector>

#include "umos/polynomial.hpp"
#include "umos/sdp.hpp"

namespace umos {

struct SemialgebraicSet {
  std::vector<Polynomial> equalities;    // c(x) = 0
  std::vector<Polynomial> inequalities;  // c(x) >= 0
};

struct UnionProblem {
  int nvars = 0;
  Polynomial objective{1};  // placeholder until nvars is known
  std::vector<SemialgebraicSet> sets;
};

// max_i ceil(deg(c_i)/2) over the set's constraints; 0 when unconstrained
int set_degree_bound(const SemialgebraicSet& set);

// smallest admissible relaxation order: max(ceil(deg f / 2), max_l d_l)
int min_order(const UnionProblem& problem);

// Assembled SDP plus the bookkeeping needed to interpret its solution:
// where each y^(l) lives among the free variables, which PSD block plays
// which role, and the row ids whose duals become equality multipliers.
struct AssembledRelaxation {
  SDPProblem sdp;
  UnionProblem problem;  // constraints as assembled (ball appended if used)
  int order = 0;
  int num_sets = 0;
  int y_dim = 0;  // |N^n_{2k}|, length of each y^(l)

  std::vector<int> y_offset;      // free-var offset of y^(l)
  std::vector<int> moment_block;  // block id of M_k[y^(l)]
  // per set, per inequality: localizing block id and the normalization
  // factor the constraint was divided by before assembly
  std::vector<std::vector<int>> ineq_block;
  std::vector<std::vector<double>> ineq_scale;
  // per set, per equality: row ids of the vanishing conditions, ordered by
  // the graded lex basis of degree 2k - deg(c); and the normalization factor
  std::vector<std::vector<std::vector<int>>> eq_rows;
  std::vector<std::vector<double>> eq_scale;
  std::vector<int> set_dl;  // degree bound d_l of the assembled set
  int coupling_row = -1;    // always the last equality row
  double ball_radius = 0.0;  // 0 when no redundant ball was added
};

// Unified relaxation over the whole union.  ball_radius > 0 appends the
// redundant inequality R^2 - |x|^2 >= 0 to every set (archimedean safeguard).
AssembledRelaxation assemble_unified(const UnionProblem& problem, int k,
                                     double ball_radius = 0.0);

// Standard relaxation for a single set (y_0 = 1 is the coupling row of a
// one-piece union).
AssembledRelaxation assemble_individual(const SemialgebraicSet& set,
                                        const Polynomial& f, int k,
                                        double ball_radius = 0.0);

struct SetCertificate {
  std::vector<Polynomial> eq_multipliers;    // phi_i, one per equality
  Eigen::MatrixXd sigma0;                    // Gram of sigma_0
  std::vector<Eigen::MatrixXd> ineq_grams;   // Gram of sigma_j per inequality
};

// Certificate for f - gamma lying in Ideal + QM of every set:
//   f - gamma = sum_i phi_i c_i + [x]^T G_0 [x] + sum_j c_j [x]^T G_j [x]
// with all Grams PSD.  residual is the worst coefficient-wise violation of
// that identity across sets after projecting the Grams to PSD.
struct SOSCertificate {
  double gamma = 0.0;
  std::vector<SetCertificate> per_set;
  double residual = 0.0;
  bool valid = false;  // residual <= tolerance (1e-6)
};

// Reads gamma from the coupling-row dual, Grams from the block duals and
// equality multipliers from the vanishing-row duals.  Throws when the
// solution carries no dual information.
SOSCertificate extract_sos_certificate(const AssembledRelaxation& rel,
                                       const SDPSolution& sol);

}  // namespace umos
