#include "umos/extraction.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>

namespace umos {

int numerical_rank(const Eigen::MatrixXd& M, double rel_tol) {
  if (M.size() == 0) return 0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(M);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cut = rel_tol * std::max(s.size() ? s(0) : 0.0, 1.0);
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cut) ++r;
  return r;
}

FlatTruncationReport check_flat_truncation(const std::vector<TMS>& ys,
                                           const std::vector<int>& d_ls, int k,
                                           double y0_tol, double rank_tol,
                                           int t_min) {
  FlatTruncationReport report;
  for (std::size_t l = 0; l < ys.size(); ++l)
    if (ys[l].values.size() > 0 && ys[l].values[0] > y0_tol)
      report.active_sets.push_back(static_cast<int>(l));

  int lo = 0;
  for (int d : d_ls) lo = std::max(lo, d);
  if (t_min >= 0) lo = std::max(lo, t_min);
  lo = std::min(lo, k);

  int best_fail = -1, best_t = k;
  std::map<int, std::pair<int, int>> best_ranks;
  for (int t = k; t >= lo; --t) {
    int failures = 0;
    std::map<int, std::pair<int, int>> ranks;
    for (int l : report.active_sets) {
      const TMS yr = restrict_tms(ys[static_cast<std::size_t>(l)], 2 * t);
      const int r_top = numerical_rank(moment_matrix(yr, t), rank_tol);
      const int r_low =
          numerical_rank(moment_matrix(yr, t - d_ls[static_cast<std::size_t>(l)]), rank_tol);
      ranks[l] = {r_low, r_top};
      if (r_low != r_top) ++failures;
    }
    if (failures == 0) {
      report.t = t;
      report.ranks = std::move(ranks);
      report.satisfied = true;
      return report;
    }
    if (best_fail < 0 || failures < best_fail) {
      best_fail = failures;
      best_t = t;
      best_ranks = std::move(ranks);
    }
  }
  report.t = best_t;
  report.ranks = std::move(best_ranks);
  report.satisfied = false;
  return report;
}

std::vector<Atom> extract_atoms(const TMS& y, int t, double rank_tol) {
  const int n = y.nvars;
  const TMS yr = restrict_tms(y, 2 * t);
  const double yscale = yr.values.size() ? yr.values.cwiseAbs().maxCoeff() : 0.0;
  if (yscale <= 1e-14) return {};

  const Eigen::MatrixXd M = moment_matrix(yr, t);
  const int side = static_cast<int>(M.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  const double cut = rank_tol * std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1.0);
  int r = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i) > cut) ++r;
  if (r == 0) return {};

  // V: side x r factor of M, dominant eigenpairs (eigenvalues ascend in Eigen)
  Eigen::MatrixXd V(side, r);
  for (int j = 0; j < r; ++j) {
    const Eigen::Index src = es.eigenvalues().size() - 1 - j;
    V.col(j) = es.eigenvectors().col(src) * std::sqrt(es.eigenvalues()(src));
  }

  // row-reduce V^T, scanning monomial columns in graded lex order; the pivot
  // columns form the quotient basis B, and W expresses every monomial in B
  Eigen::MatrixXd W = V.transpose();  // r x side
  std::vector<int> basis;
  // a column whose eliminated residual sits at rank_tol relative to the factor
  // is dependent at the accuracy of the rank decision itself
  const double piv_tol = rank_tol * std::max(1.0, W.cwiseAbs().maxCoeff());
  int row = 0;
  for (int col = 0; col < side && row < r; ++col) {
    int piv = row;
    for (int i = row + 1; i < r; ++i)
      if (std::abs(W(i, col)) > std::abs(W(piv, col))) piv = i;
    if (std::abs(W(piv, col)) <= piv_tol) continue;
    W.row(piv).swap(W.row(row));
    W.row(row) /= W(row, col);
    for (int i = 0; i < r; ++i)
      if (i != row) W.row(i) -= W(i, col) * W.row(row);
    basis.push_back(col);
    ++row;
  }
  if (row < r) throw ExtractionError("moment matrix factor is rank-deficient beyond tolerance");

  const MonomialBasis mono(n, t);
  // multiplication by x_s must keep the basis inside degree t
  std::vector<Eigen::MatrixXd> N(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    N[static_cast<std::size_t>(s)].resize(r, r);
    for (int i = 0; i < r; ++i) {
      const Exponent shifted = mono[static_cast<std::size_t>(basis[static_cast<std::size_t>(i)])] +
                               Exponent::unit(n, s);
      if (shifted.degree() > t)
        throw ExtractionError("quotient basis not closed under multiplication");
      N[static_cast<std::size_t>(s)].col(i) = W.col(static_cast<Eigen::Index>(mono.index_of(shifted)));
    }
  }

  std::mt19937 gen(20240915u);
  std::uniform_real_distribution<double> unif(0.1, 1.0);
  Eigen::VectorXd c(n);
  for (int s = 0; s < n; ++s) c(s) = unif(gen);
  c /= c.sum();
  Eigen::MatrixXd Nc = Eigen::MatrixXd::Zero(r, r);
  for (int s = 0; s < n; ++s) Nc += c(s) * N[static_cast<std::size_t>(s)];

  Eigen::RealSchur<Eigen::MatrixXd> schur(Nc);
  const Eigen::MatrixXd& Q = schur.matrixU();

  std::vector<Atom> atoms(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    atoms[static_cast<std::size_t>(i)].point.resize(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s)
      atoms[static_cast<std::size_t>(i)].point[static_cast<std::size_t>(s)] =
          Q.col(i).dot(N[static_cast<std::size_t>(s)] * Q.col(i));
  }

  // weights by least squares over all moments of degree <= 2t
  const MonomialBasis full(n, 2 * t);
  Eigen::MatrixXd A(static_cast<Eigen::Index>(full.size()), r);
  for (int i = 0; i < r; ++i) {
    const TMS dirac = tms_from_point(atoms[static_cast<std::size_t>(i)].point, 2 * t);
    A.col(i) = dirac.values;
  }
  const Eigen::VectorXd lam = A.colPivHouseholderQr().solve(yr.values);
  const double resid = (A * lam - yr.values).lpNorm<Eigen::Infinity>();
  if (resid > 1e-6 * (1.0 + yscale))
    throw ExtractionError("atomic reconstruction residual too large");
  for (int i = 0; i < r; ++i) {
    if (lam(i) <= 0.0) throw ExtractionError("extracted weight not positive");
    atoms[static_cast<std::size_t>(i)].weight = lam(i);
  }

  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& a, const Atom& b) { return a.point < b.point; });
  return atoms;
}

bool certify_minimizers(const UnionProblem& problem, const std::vector<Atom>& atoms,
                        double f_mom, double tol) {
  if (atoms.empty()) return false;
  double mass = 0.0;
  for (const Atom& a : atoms) {
    mass += a.weight;
    if (a.set_index < 0 || a.set_index >= static_cast<int>(problem.sets.size())) return false;
    const SemialgebraicSet& set = problem.sets[static_cast<std::size_t>(a.set_index)];
    for (const auto& c : set.equalities)
      if (std::abs(c.evaluate(a.point)) > tol) return false;
    for (const auto& c : set.inequalities)
      if (c.evaluate(a.point) < -tol) return false;
    if (std::abs(problem.objective.evaluate(a.point) - f_mom) > tol * (1.0 + std::abs(f_mom)))
      return false;
  }
  return std::abs(mass - 1.0) <= tol;
}

std::vector<Minimizer> merge_atoms(const std::vector<Atom>& atoms, double merge_tol) {
  std::vector<Minimizer> out;
  for (const Atom& a : atoms) {
    Minimizer* hit = nullptr;
    for (Minimizer& m : out) {
      double d2 = 0.0;
      for (std::size_t i = 0; i < m.point.size(); ++i) {
        const double d = m.point[i] - a.point[i];
        d2 += d * d;
      }
      if (std::sqrt(d2) <= merge_tol) {
        hit = &m;
        break;
      }
    }
    if (hit == nullptr) {
      out.push_back({a.point, a.weight, {a.set_index}});
    } else {
      hit->weight += a.weight;
      if (std::find(hit->sets.begin(), hit->sets.end(), a.set_index) == hit->sets.end())
        hit->sets.push_back(a.set_index);
    }
  }
  for (Minimizer& m : out) std::sort(m.sets.begin(), m.sets.end());
  std::sort(out.begin(), out.end(),
            [](const Minimizer& a, const Minimizer& b) { return a.point < b.point; });
  return out;
}

}  // namespace umos
