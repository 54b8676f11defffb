#pragma once

// One-variable minimization over a finite union of compact intervals.
// A single Hankel-structured SDP is exact here (no order escalation):
// for odd degree d = 2*d0+1 each interval [a,b] contributes the pencil pair
// b*M - N >= 0, N - a*M >= 0, and for even d = 2*d0 the banded combination
// (a+b)*N' - a*b*M' - G >= 0 together with M >= 0, where M, N, G are the
// Hankel matrices below.  Minimizers come out of small Hankel linear systems
// followed by companion-matrix rooting.

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "umos/extraction.hpp"
#include "umos/hierarchy.hpp"
#include "umos/moment.hpp"
#include "umos/polynomial.hpp"
#include "umos/sdp.hpp"

namespace umos {

struct IntervalUnion {
  std::vector<std::pair<double, double>> intervals;  // [a_l, b_l], a_l < b_l
};

// M[i][j] = y_{i+j}, N[i][j] = y_{i+j+1}, G[i][j] = y_{i+j+2};
// M and N have side d0+1, G has side d0.
struct HankelSet {
  Eigen::MatrixXd M;
  Eigen::MatrixXd N;
  Eigen::MatrixXd G;
};

// requires y.order >= 2*d0; N is filled when y.order >= 2*d0+1 and left
// empty otherwise
HankelSet hankel_matrices(const TMS& y, int d0);

// the exact moment SDP for min f over the interval union; one raw moment
// vector y^(l) of length deg(f)+1 per interval (free variables, ordered by
// interval then by degree), coupled by sum_l y_0^(l) = 1 as the last row
SDPProblem assemble_univariate(const Polynomial& f, const IntervalUnion& K);

// coefficients g of the shift recurrence y_{i+r} = sum_j g_j y_{i+j},
// fitted over rows i = 0..rows-1 in least squares; the atoms are the roots
// of g0 + g1 x + ... + g_{r-1} x^{r-1} - x^r.  Throws when the residual
// says the moment vector admits no degree-r recurrence.
Eigen::VectorXd fit_hankel_recurrence(const TMS& y, int r, int rows);

// recover atoms of a flat odd-degree moment vector (y.order = 2*d0+1):
// fit g from the rectangular Hankel system, root g0+...+g_{r-1}x^{r-1}-x^r
// by companion matrix, then Vandermonde least squares for the weights
std::vector<Atom> extract_roots_odd(const TMS& y, double rank_tol);

// even-degree counterpart (y.order = 2*d0); when the moment matrix has full
// rank d0+1 the vector is first extended by the smallest y_{2*d0+1} that
// keeps b*M >= N >= a*M, found by bisection on a PSD feasibility check
std::vector<Atom> extract_roots_even(const TMS& y, std::pair<double, double> interval,
                                     double rank_tol);

// assemble, solve once, extract per active interval; minimizers merged
// across intervals.  Atom count is checked against the 2m + floor(d/2) cap.
SolveReport solve_univariate(const Polynomial& f, const IntervalUnion& K,
                             const SolverSettings& settings = {});

}  // namespace umos
