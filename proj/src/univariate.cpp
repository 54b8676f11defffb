#include "umos/univariate.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace umos {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void check_intervals(const IntervalUnion& K) {
  if (K.intervals.empty()) throw std::invalid_argument("interval union is empty");
  for (const auto& [a, b] : K.intervals) {
    if (!std::isfinite(a) || !std::isfinite(b))
      throw std::invalid_argument("unbounded intervals are not supported");
    if (!(a < b)) throw std::invalid_argument("interval endpoints must satisfy a < b");
  }
}

double lambda_min(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// roots of g0 + g1 x + ... + g_{r-1} x^{r-1} - x^r via the companion matrix;
// imaginary parts above tolerance mean the moment vector was not atomic
std::vector<double> companion_roots(const Eigen::VectorXd& g) {
  const int r = static_cast<int>(g.size());
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(r, r);
  for (int i = 0; i + 1 < r; ++i) C(i + 1, i) = 1.0;
  C.col(r - 1) = g;
  Eigen::EigenSolver<Eigen::MatrixXd> es(C);
  std::vector<double> roots;
  for (int i = 0; i < r; ++i) {
    const std::complex<double> z = es.eigenvalues()(i);
    if (std::abs(z.imag()) > 1e-6)
      throw ExtractionError("companion root has a non-negligible imaginary part");
    roots.push_back(z.real());
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

// weights by Vandermonde least squares against every available moment
std::vector<Atom> atoms_from_roots(const TMS& y, const std::vector<double>& roots) {
  const int r = static_cast<int>(roots.size());
  const Eigen::Index rows = y.values.size();
  Eigen::MatrixXd V(rows, r);
  for (int j = 0; j < r; ++j) {
    double p = 1.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      V(i, j) = p;
      p *= roots[static_cast<std::size_t>(j)];
    }
  }
  const Eigen::VectorXd w = V.colPivHouseholderQr().solve(y.values);
  const double tol = 1e-6 * (1.0 + y.values.cwiseAbs().maxCoeff());
  if ((V * w - y.values).lpNorm<Eigen::Infinity>() > tol)
    throw ExtractionError("atomic reconstruction residual too large");
  std::vector<Atom> atoms;
  for (int j = 0; j < r; ++j) {
    if (w(j) <= 0.0) throw ExtractionError("extracted weight not positive");
    atoms.push_back({{roots[static_cast<std::size_t>(j)]}, w(j), -1});
  }
  return atoms;
}

}  // namespace

Eigen::VectorXd fit_hankel_recurrence(const TMS& y, int r, int rows) {
  if (y.nvars != 1) throw std::invalid_argument("fit_hankel_recurrence: univariate moments required");
  if (r < 1 || rows < 1 || rows + r - 1 > y.order)
    throw std::invalid_argument("fit_hankel_recurrence: system exceeds available moments");
  Eigen::MatrixXd A(rows, r);
  Eigen::VectorXd b(rows);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < r; ++j) A(i, j) = y[static_cast<std::size_t>(i + j)];
    b(i) = y[static_cast<std::size_t>(i + r)];
  }
  const Eigen::VectorXd g = A.colPivHouseholderQr().solve(b);
  const double tol = 1e-6 * (1.0 + y.values.cwiseAbs().maxCoeff());
  if ((A * g - b).lpNorm<Eigen::Infinity>() > tol)
    throw ExtractionError("Hankel recurrence residual too large");
  return g;
}

HankelSet hankel_matrices(const TMS& y, int d0) {
  if (y.nvars != 1) throw std::invalid_argument("hankel_matrices: univariate moments required");
  if (d0 < 0) throw std::invalid_argument("hankel_matrices: negative order");
  if (y.order < 2 * d0)
    throw std::invalid_argument("hankel_matrices: insufficient moment degree");
  HankelSet h;
  h.M.resize(d0 + 1, d0 + 1);
  for (int i = 0; i <= d0; ++i)
    for (int j = 0; j <= d0; ++j) h.M(i, j) = y[static_cast<std::size_t>(i + j)];
  if (y.order >= 2 * d0 + 1) {
    h.N.resize(d0 + 1, d0 + 1);
    for (int i = 0; i <= d0; ++i)
      for (int j = 0; j <= d0; ++j) h.N(i, j) = y[static_cast<std::size_t>(i + j + 1)];
  }
  h.G.resize(d0, d0);
  for (int i = 0; i < d0; ++i)
    for (int j = 0; j < d0; ++j) h.G(i, j) = y[static_cast<std::size_t>(i + j + 2)];
  return h;
}

SDPProblem assemble_univariate(const Polynomial& f, const IntervalUnion& K) {
  if (f.nvars() != 1)
    throw std::invalid_argument("assemble_univariate: univariate objective required");
  const int d = f.degree();
  if (d == 0) throw std::invalid_argument("assemble_univariate: constant objective");
  check_intervals(K);

  const int m = static_cast<int>(K.intervals.size());
  const bool odd = (d % 2) != 0;
  const int d0 = odd ? (d - 1) / 2 : d / 2;
  const int ylen = d + 1;

  SDPProblem sdp;
  sdp.num_free = m * ylen;

  // blocks first so pin rows can reference them
  for (int l = 0; l < m; ++l) {
    if (odd) {
      sdp.block_sides.push_back(d0 + 1);
      sdp.block_meta.push_back({l, "upper"});
      sdp.block_sides.push_back(d0 + 1);
      sdp.block_meta.push_back({l, "lower"});
    } else {
      sdp.block_sides.push_back(d0);
      sdp.block_meta.push_back({l, "band"});
      sdp.block_sides.push_back(d0 + 1);
      sdp.block_meta.push_back({l, "moment"});
    }
  }

  for (int l = 0; l < m; ++l) {
    const auto [a, b] = K.intervals[static_cast<std::size_t>(l)];
    const int off = l * ylen;
    const int blk0 = 2 * l;
    if (odd) {
      // b*M - N and N - a*M, entries over y_{i+j} and y_{i+j+1}
      for (int r = 0; r <= d0; ++r)
        for (int c = r; c <= d0; ++c) {
          EqualityRow up;
          up.entries.push_back({blk0, r, c, 1.0});
          up.frees.push_back({off + r + c, -b});
          up.frees.push_back({off + r + c + 1, 1.0});
          sdp.equalities.push_back(std::move(up));
          EqualityRow lo;
          lo.entries.push_back({blk0 + 1, r, c, 1.0});
          lo.frees.push_back({off + r + c + 1, -1.0});
          lo.frees.push_back({off + r + c, a});
          sdp.equalities.push_back(std::move(lo));
        }
    } else {
      // (a+b)*N' - a*b*M' - G over side d0, plus M itself
      for (int r = 0; r < d0; ++r)
        for (int c = r; c < d0; ++c) {
          EqualityRow band;
          band.entries.push_back({blk0, r, c, 1.0});
          band.frees.push_back({off + r + c + 1, -(a + b)});
          band.frees.push_back({off + r + c, a * b});
          band.frees.push_back({off + r + c + 2, 1.0});
          sdp.equalities.push_back(std::move(band));
        }
      for (int r = 0; r <= d0; ++r)
        for (int c = r; c <= d0; ++c) {
          EqualityRow mom;
          mom.entries.push_back({blk0 + 1, r, c, 1.0});
          mom.frees.push_back({off + r + c, -1.0});
          sdp.equalities.push_back(std::move(mom));
        }
    }
  }

  EqualityRow coupling;
  for (int l = 0; l < m; ++l) coupling.frees.push_back({l * ylen, 1.0});
  coupling.rhs = 1.0;
  sdp.equalities.push_back(std::move(coupling));

  for (const auto& [e, c] : f.terms())
    for (int l = 0; l < m; ++l) sdp.objective.frees.push_back({l * ylen + e.degree(), c});

  sdp.validate();
  return sdp;
}

std::vector<Atom> extract_roots_odd(const TMS& y, double rank_tol) {
  if (y.nvars != 1 || y.order % 2 == 0)
    throw std::invalid_argument("extract_roots_odd: odd-degree univariate moments required");
  const int d0 = (y.order - 1) / 2;
  const HankelSet h = hankel_matrices(y, d0);
  const int r = numerical_rank(h.M, rank_tol);
  if (r == 0) return {};
  const Eigen::VectorXd g = fit_hankel_recurrence(y, r, 2 * d0 - r + 2);
  return atoms_from_roots(y, companion_roots(g));
}

std::vector<Atom> extract_roots_even(const TMS& y, std::pair<double, double> interval,
                                     double rank_tol) {
  if (y.nvars != 1 || y.order % 2 != 0)
    throw std::invalid_argument("extract_roots_even: even-degree univariate moments required");
  const int d0 = y.order / 2;
  const HankelSet h = hankel_matrices(y, d0);
  const int r = numerical_rank(h.M, rank_tol);
  if (r == 0) return {};

  if (r <= d0) {
    const Eigen::VectorXd g = fit_hankel_recurrence(y, r, 2 * d0 - r + 1);
    return atoms_from_roots(y, companion_roots(g));
  }

  // full-rank case: extend by the smallest y_{2*d0+1} keeping b*M >= N >= a*M.
  // Both pencils are affine in the new scalar z (it only enters N's corner),
  // so their joint minimum eigenvalue is concave in z and the feasible z form
  // an interval; locate its maximum by ternary search, then the left edge by
  // bisection.
  const auto [a, b] = interval;
  Eigen::MatrixXd N0(d0 + 1, d0 + 1);
  for (int i = 0; i <= d0; ++i)
    for (int j = 0; j <= d0; ++j)
      N0(i, j) = (i + j + 1 <= y.order) ? y[static_cast<std::size_t>(i + j + 1)] : 0.0;
  const auto feas_margin = [&](double z) {
    Eigen::MatrixXd N = N0;
    N(d0, d0) = z;
    return std::min(lambda_min(b * h.M - N), lambda_min(N - a * h.M));
  };
  const double R = std::max({std::abs(a), std::abs(b), 1.0});
  const double Z = (1.0 + y[0]) * std::pow(R, 2 * d0 + 1) + 1.0;
  double lo = -Z, hi = Z;
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (feas_margin(m1) < feas_margin(m2))
      lo = m1;
    else
      hi = m2;
  }
  const double z_star = 0.5 * (lo + hi);
  const double f_star = feas_margin(z_star);
  const double scale = std::max(1.0, h.M.cwiseAbs().maxCoeff());
  if (f_star < -1e-6 * scale)
    throw ExtractionError("no PSD-feasible Hankel extension exists");
  const double eps = std::max(0.0, -f_star) + 1e-12 * scale;

  double z;
  if (feas_margin(-Z) >= -eps) {
    z = -Z;
  } else {
    double zlo = -Z, zhi = z_star;
    while (zhi - zlo > 1e-12 * (1.0 + std::abs(zhi))) {
      const double mid = 0.5 * (zlo + zhi);
      if (feas_margin(mid) >= -eps)
        zhi = mid;
      else
        zlo = mid;
    }
    z = zhi;
  }

  Eigen::VectorXd ext(y.values.size() + 1);
  ext.head(y.values.size()) = y.values;
  ext(y.values.size()) = z;
  const TMS yext(1, y.order + 1, std::move(ext));
  const Eigen::VectorXd g = fit_hankel_recurrence(yext, r, d0 + 1);
  std::vector<Atom> atoms = atoms_from_roots(yext, companion_roots(g));
  // weights were fitted against the extended vector; report against y's mass
  return atoms;
}

SolveReport solve_univariate(const Polynomial& f, const IntervalUnion& K,
                             const SolverSettings& settings) {
  if (f.nvars() != 1)
    throw std::invalid_argument("solve_univariate: univariate objective required");
  check_intervals(K);

  const auto t_start = std::chrono::steady_clock::now();
  SolveReport report;

  if (f.degree() == 0) {
    report.status = ReportStatus::OptimalCertified;
    report.bound = f.evaluate({0.0});
    report.minimizers.push_back({{K.intervals[0].first}, 1.0, {0}});
    report.timings["total"] = seconds_since(t_start);
    return report;
  }

  const int d = f.degree();
  const bool odd = (d % 2) != 0;
  const int d0 = odd ? (d - 1) / 2 : d / 2;
  const int m = static_cast<int>(K.intervals.size());
  const int ylen = d + 1;

  SDPProblem sdp = assemble_univariate(f, K);
  auto t0 = std::chrono::steady_clock::now();
  SDPSolution sol = solve(sdp, settings);
  report.timings["solve"] = seconds_since(t0);

  if (sol.status != SolveStatus::Optimal) {
    report.status = ReportStatus::SolverFailure;
    report.bound = -std::numeric_limits<double>::infinity();
    report.timings["total"] = seconds_since(t_start);
    return report;
  }

  const double f_mom = sol.primal_obj;
  report.orders_tried.push_back({d0, f_mom});
  report.bound = f_mom;

  t0 = std::chrono::steady_clock::now();
  const Polynomial df = f.derivative(0);
  const Polynomial ddf = df.derivative(0);
  // safeguarded Newton descent of f within [a,b]; extracted roots inherit an
  // O(sqrt(gap)) offset wherever f is flat around its minimizer, and the
  // moment bound is far more accurate than the positions in that case
  const auto polish_root = [&](double x, double a, double b) {
    double best = f.evaluate({x});
    for (int it = 0; it < 40; ++it) {
      const double d1 = df.evaluate({x});
      const double d2 = ddf.evaluate({x});
      double xn;
      if (d2 > 1e-12)
        xn = std::clamp(x - d1 / d2, a, b);
      else if (d1 != 0.0)
        xn = d1 > 0.0 ? a : b;  // locally concave: downhill ends at an endpoint
      else
        break;
      const double fn = f.evaluate({xn});
      if (fn > best || xn == x) break;
      x = xn;
      best = fn;
    }
    return x;
  };

  std::vector<Atom> atoms;
  bool extracted = true;
  try {
    for (int l = 0; l < m; ++l) {
      const TMS y(1, d, sol.free_values.segment(l * ylen, ylen));
      if (y[0] <= 1e-6) continue;
      const auto [a, b] = K.intervals[static_cast<std::size_t>(l)];
      std::vector<Atom> part = odd ? extract_roots_odd(y, 1e-6)
                                   : extract_roots_even(y, {a, b}, 1e-6);
      for (Atom& atom : part) {
        double& x = atom.point[0];
        if (x < a || x > b) {
          if (x >= a - 1e-6 && x <= b + 1e-6)
            x = std::clamp(x, a, b);
          else
            throw ExtractionError("extracted root lies outside its interval");
        }
        x = polish_root(x, a, b);
        atom.set_index = l;
      }
      atoms.insert(atoms.end(), part.begin(), part.end());
    }
  } catch (const ExtractionError&) {
    extracted = false;
  }
  report.timings["extract"] = seconds_since(t0);

  double mass = 0.0;
  for (const Atom& atom : atoms) {
    mass += atom.weight;
    if (std::abs(f.evaluate(atom.point) - f_mom) > 1e-6 * (1.0 + std::abs(f_mom)))
      extracted = false;
  }
  if (atoms.empty() || std::abs(mass - 1.0) > 1e-6 ||
      static_cast<int>(atoms.size()) > 2 * m + d / 2)
    extracted = false;

  if (extracted) {
    report.status = ReportStatus::OptimalCertified;
    report.minimizers = merge_atoms(atoms, 1e-4);
  } else {
    report.status = ReportStatus::LowerBoundOnly;
  }
  report.timings["total"] = seconds_since(t_start);
  return report;
}

}  // namespace umos
