#pragma once

// Flat-truncation detection and extraction of the atomic measure behind a
// moment-relaxation solution.  When rank M_{t-d_l}[y] = rank M_t[y] on every
// block carrying mass, each y^(l) is a finite sum of Dirac moments; the atoms
// are recovered with the multiplication-matrix (companion) method and become
// the reported minimizers.

#include <Eigen/Dense>

#include <map>
#include <stdexcept>
#include <vector>

#include "umos/moment.hpp"
#include "umos/relaxation.hpp"

namespace umos {

struct Atom {
  std::vector<double> point;
  double weight = 0.0;
  int set_index = -1;
};

// atoms coinciding up to 1e-6 across overlapping sets, with weights summed
struct Minimizer {
  std::vector<double> point;
  double weight = 0.0;
  std::vector<int> sets;
};

struct FlatTruncationReport {
  int t = -1;
  std::vector<int> active_sets;                 // l with y_0^(l) > y0_tol
  std::map<int, std::pair<int, int>> ranks;     // l -> (rank M_{t-d_l}, rank M_t)
  bool satisfied = false;
};

class ExtractionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// count of singular values exceeding rel_tol * max(sigma_1, 1)
int numerical_rank(const Eigen::MatrixXd& M, double rel_tol);

// Searches t downward from k (largest admissible first) for rank equality on
// every active block.  t_min < 0 means max of d_ls; the caller can raise it
// (e.g. to ceil(deg f / 2)).  Returns best-t diagnostics when unsatisfied.
FlatTruncationReport check_flat_truncation(const std::vector<TMS>& ys,
                                           const std::vector<int>& d_ls, int k,
                                           double y0_tol, double rank_tol,
                                           int t_min = -1);

// Atoms of the representing measure of y|_{2t}.  Throws ExtractionError when
// the reconstruction residual exceeds 1e-6 * (1 + |y|_inf) or the echelon
// basis is not closed under multiplication by the variables.
std::vector<Atom> extract_atoms(const TMS& y, int t, double rank_tol);

// every atom feasible in its set, objective value matching f_mom, and total
// weight 1, all within tol
bool certify_minimizers(const UnionProblem& problem, const std::vector<Atom>& atoms,
                        double f_mom, double tol);

std::vector<Minimizer> merge_atoms(const std::vector<Atom>& atoms,
                                   double merge_tol = 1e-6);

}  // namespace umos
