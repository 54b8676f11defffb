#pragma once

// Conic problem container and the interior-point solver contract.
//
// A problem has PSD matrix blocks X_1..X_B, a vector u of free scalar
// variables, and linear equality rows over all of them:
//
//   minimize    sum_j <C_j, X_j> + c^T u + const
//   subject to  sum over row terms  gamma * X_j(r,c) + a^T u = rhs   (per row)
//               X_j PSD.
//
// A block entry term with coefficient gamma contributes gamma * X_j(r,c)
// to its row (entries are addressed on the upper triangle, X is symmetric).

#include <Eigen/Dense>

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace umos {

struct BlockEntryTerm {
  int block = 0;
  int row = 0;  // row <= col
  int col = 0;
  double coef = 0.0;
};

struct FreeTerm {
  int var = 0;
  double coef = 0.0;
};

struct EqualityRow {
  std::vector<BlockEntryTerm> entries;
  std::vector<FreeTerm> frees;
  double rhs = 0.0;
};

struct SdpObjective {
  std::vector<BlockEntryTerm> entries;
  std::vector<FreeTerm> frees;
  double constant = 0.0;
};

struct BlockMeta {
  int set_index = -1;
  std::string role;  // "moment", "ineq:<i>", ...
};

struct SDPProblem {
  std::vector<int> block_sides;
  std::vector<BlockMeta> block_meta;  // optional; empty or parallel to block_sides
  int num_free = 0;
  std::vector<EqualityRow> equalities;
  SdpObjective objective;

  int num_blocks() const { return static_cast<int>(block_sides.size()); }
  void validate() const;  // throws on out-of-range references
};

enum class SolveStatus {
  Optimal,
  PrimalInfeasible,
  DualInfeasible,
  MaxIters,
  NumericalFailure,
};

std::string to_string(SolveStatus s);

struct SolverSettings {
  double feas_tol = 1e-8;
  double gap_tol = 1e-8;
  // best iterate is still reported Optimal at this accuracy when the
  // iteration stalls or the budget runs out
  double accept_tol = 1e-6;
  double infeasibility_threshold = 1e-8;
  int max_iters = 200;
  bool verbose = false;
};

struct SDPSolution {
  SolveStatus status = SolveStatus::NumericalFailure;
  Eigen::VectorXd free_values;                 // u
  std::vector<Eigen::MatrixXd> block_values;   // X_j
  Eigen::VectorXd eq_duals;                    // nu per equality row
  std::vector<Eigen::MatrixXd> block_duals;    // Z_j
  double primal_obj = 0.0;
  double dual_obj = 0.0;
  // Scaled residuals of the reported iterate; on NumericalFailure/MaxIters
  // they describe the best iterate found, letting callers decide whether the
  // dual objective is still usable as a bound.
  double primal_infeasibility = std::numeric_limits<double>::infinity();
  double dual_infeasibility = std::numeric_limits<double>::infinity();
  int iterations = 0;
  // For PrimalInfeasible, eq_duals/block_duals hold the improving ray and
  // certificate_residual the norm of A^*(ray) (ray normalized to value 1).
  double certificate_residual = -1.0;
};

SDPSolution solve(const SDPProblem& prob, const SolverSettings& settings = {});

// Sparse SDPA (.dat-s) export of the problem after elimination of the
// block-entry identification rows (free variables become the SDPA variables,
// remaining equalities are written as paired LP rows).
void write_sdpa(const SDPProblem& prob, std::ostream& os);
void write_sdpa_file(const SDPProblem& prob, const std::string& path);

}  // namespace umos
