#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "umos/hierarchy.hpp"
#include "umos/relaxation.hpp"

namespace umos {

// Splits {x : h(x) + sum_i |g_i(x)| >= 0} into its 2^l sign pieces.  Piece s
// carries the inequalities h + sum_i s_i g_i >= 0 followed by s_i g_i >= 0 for
// each i; sign vectors are enumerated with s_1 slowest and + before -.  When a
// g_i is a single monomial its sign condition is reduced exponent-wise mod 2
// (s x1^3 >= 0 becomes s x1 >= 0); individual pieces may shrink but their
// union is unchanged, since a point always lands in the piece matching the
// sign of the reduced monomial.  Throws when l exceeds max_terms.
std::vector<SemialgebraicSet> signed_decomposition(const Polynomial& h,
                                                   const std::vector<Polynomial>& gs,
                                                   int max_terms = 12);

enum class ParityCase { EvenEven, EvenOdd, OddEven, OddOdd };

std::string to_string(ParityCase c);

// Union-of-sets encoding of the (p,q)-norm of a matrix, max ||Ax||_p over
// ||x||_q = 1, as a polynomial minimization.  Absolute values are removed by
// parity: even powers directly, odd powers by splitting into sign pieces.
// When p is odd the norm value is carried by an extra lifted variable
// x_{n+1} >= 0 with x_{n+1}^2 <= (sum_i ||a_i||_1)^2.  The objective is
// negated so that the union problem is a minimization; value_map records how
// the optimal value maps back to the norm.
struct NormProblem {
  int p = 2;
  int q = 2;
  ParityCase parity_case = ParityCase::EvenEven;
  UnionProblem union_problem;
  bool lifted = false;  // true when the last variable carries ||Ax||_p
  std::string value_map;
};

NormProblem pq_norm_problem(const Eigen::MatrixXd& A, int p, int q);

struct PqNormResult {
  double value = 0.0;
  std::vector<double> maximizer;  // empty when only a bound was obtained
  bool certified = false;
  SolveReport report;
};

// Computes ||A||_{p,q} by solving the union encoding through the moment
// hierarchy.  The maximizer is reported in the original x variables with its
// first nonzero coordinate made positive (x and -x are always both optimal).
PqNormResult pq_norm(const Eigen::MatrixXd& A, int p, int q,
                     const HierarchyOptions& opts = {});

}  // namespace umos
