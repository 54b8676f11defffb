#include "umos/moment.hpp"

#include <cmath>
#include <stdexcept>

namespace umos {

TMS::TMS(int nvars_, int order_, Eigen::VectorXd values_)
    : nvars(nvars_), order(order_), values(std::move(values_)) {
  if (nvars < 1) throw std::invalid_argument("TMS: nvars must be >= 1");
  if (order < 0) throw std::invalid_argument("TMS: negative order");
  auto want = MonomialBasis::dimension(nvars, order);
  if (static_cast<std::size_t>(values.size()) != want)
    throw std::invalid_argument("TMS: value vector has wrong length");
}

double riesz(const TMS& y, const Polynomial& p) {
  if (p.nvars() != y.nvars) throw std::invalid_argument("riesz: variable count mismatch");
  if (p.degree() > y.order) throw std::invalid_argument("riesz: polynomial degree exceeds moment order");
  MonomialBasis basis(y.nvars, y.order);
  double total = 0.0;
  for (const auto& [e, c] : p.terms()) total += c * y[basis.index_of(e)];
  return total;
}

TMS tms_from_point(const std::vector<double>& u, int order) {
  int n = static_cast<int>(u.size());
  if (n < 1) throw std::invalid_argument("tms_from_point: empty point");
  MonomialBasis basis(n, order);
  Eigen::VectorXd v(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const Exponent& e = basis[i];
    double m = 1.0;
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < e[j]; ++k) m *= u[j];
    v[static_cast<Eigen::Index>(i)] = m;
  }
  return TMS(n, order, std::move(v));
}

TMS restrict_tms(const TMS& y, int new_order) {
  if (new_order > y.order) throw std::invalid_argument("restrict_tms: order increase");
  auto len = MonomialBasis::dimension(y.nvars, new_order);
  return TMS(y.nvars, new_order, y.values.head(static_cast<Eigen::Index>(len)));
}

Eigen::MatrixXd moment_matrix(const TMS& y, int k) {
  return localizing_matrix(y, Polynomial::constant(y.nvars, 1.0), k);
}

Eigen::MatrixXd localizing_matrix(const TMS& y, const Polynomial& p, int k) {
  if (p.nvars() != y.nvars)
    throw std::invalid_argument("localizing_matrix: variable count mismatch");
  if (p.is_zero()) throw std::invalid_argument("localizing_matrix: zero polynomial");
  int s = k - (p.degree() + 1) / 2;
  if (s < 0) throw std::invalid_argument("localizing_matrix: order too small for degree");
  if (2 * k > y.order)
    throw std::invalid_argument("localizing_matrix: moment order too small");
  MonomialBasis rows(y.nvars, s);
  MonomialBasis tms_basis(y.nvars, y.order);
  Eigen::Index side = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd M(side, side);
  for (Eigen::Index i = 0; i < side; ++i) {
    for (Eigen::Index j = i; j < side; ++j) {
      Exponent ab = rows[static_cast<std::size_t>(i)] + rows[static_cast<std::size_t>(j)];
      double v = 0.0;
      for (const auto& [g, c] : p.terms()) v += c * y[tms_basis.index_of(g + ab)];
      M(i, j) = v;
      M(j, i) = v;
    }
  }
  return M;
}

Eigen::VectorXd localizing_vector(const TMS& y, const Polynomial& p) {
  if (p.nvars() != y.nvars)
    throw std::invalid_argument("localizing_vector: variable count mismatch");
  int s = y.order - p.degree();
  if (s < 0) throw std::invalid_argument("localizing_vector: moment order too small");
  MonomialBasis rows(y.nvars, s);
  MonomialBasis tms_basis(y.nvars, y.order);
  Eigen::VectorXd v(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double t = 0.0;
    for (const auto& [g, c] : p.terms()) t += c * y[tms_basis.index_of(g + rows[i])];
    v[static_cast<Eigen::Index>(i)] = t;
  }
  return v;
}

}  // namespace umos
