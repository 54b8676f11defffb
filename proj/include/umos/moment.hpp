#pragma once

// Truncated moment sequences and the linear-algebra objects built from them:
// Riesz functional, moment matrix M_k[y], localizing matrices L_p[y] and
// localizing vectors V_p[y].  Entries are indexed by the graded lex basis
// from polynomial.hpp; matrices are filled on the upper triangle and
// mirrored so they are exactly symmetric.

#include <Eigen/Dense>

#include "umos/polynomial.hpp"

namespace umos {

struct TMS {
  int nvars = 0;
  int order = 0;  // moments are indexed by all exponents of degree <= order
  Eigen::VectorXd values;

  TMS() = default;
  TMS(int nvars_, int order_, Eigen::VectorXd values_);

  double operator[](std::size_t i) const { return values[static_cast<Eigen::Index>(i)]; }
  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

// <p, y> = sum_a p_a y_a; requires deg(p) <= y.order
double riesz(const TMS& y, const Polynomial& p);

// moments of the Dirac measure at u, up to the given order
TMS tms_from_point(const std::vector<double>& u, int order);

// prefix restriction to degree <= new_order (graded lex order makes this a slice)
TMS restrict_tms(const TMS& y, int new_order);

// M_k[y]: side |N^n_k|; requires 2k <= y.order
Eigen::MatrixXd moment_matrix(const TMS& y, int k);

// L_p[y] at order k: side |N^n_s|, s = k - ceil(deg(p)/2); requires s >= 0
Eigen::MatrixXd localizing_matrix(const TMS& y, const Polynomial& p, int k);

// V_p[y]: length |N^n_s|, s = y.order - deg(p); requires s >= 0
Eigen::VectorXd localizing_vector(const TMS& y, const Polynomial& p);

}  // namespace umos
