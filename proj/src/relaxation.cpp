#include "umos/relaxation.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace umos {

namespace {

int half_degree_up(const Polynomial& p) { return (p.degree() + 1) / 2; }

Polynomial ball_polynomial(int nvars, double radius) {
  Polynomial b = Polynomial::constant(nvars, radius * radius);
  for (int i = 0; i < nvars; ++i) {
    b.add_term(Exponent::unit(nvars, i) + Exponent::unit(nvars, i), -1.0);
  }
  return b;
}

double normalization(const Polynomial& p) {
  double s = p.max_abs_coefficient();
  return s > 0.0 ? s : 1.0;
}

void check_problem(const UnionProblem& problem) {
  if (problem.sets.empty()) throw std::invalid_argument("union problem needs at least one set");
  if (problem.objective.nvars() != problem.nvars)
    throw std::invalid_argument("objective variable count mismatch");
  for (const auto& set : problem.sets) {
    for (const auto& c : set.equalities)
      if (c.nvars() != problem.nvars) throw std::invalid_argument("equality variable count mismatch");
    for (const auto& c : set.inequalities)
      if (c.nvars() != problem.nvars) throw std::invalid_argument("inequality variable count mismatch");
  }
}

// one row per upper-triangle entry: X(r,c) - sum_g p_g y_{a_r + a_c + g} = 0
void pin_block_entries(SDPProblem& sdp, int block, int side, int y_offset,
                       const MonomialBasis& rows_basis, const MonomialBasis& y_basis,
                       const Polynomial& p) {
  for (int r = 0; r < side; ++r) {
    for (int c = r; c < side; ++c) {
      EqualityRow row;
      row.entries.push_back({block, r, c, 1.0});
      const Exponent rc = rows_basis[static_cast<std::size_t>(r)] +
                          rows_basis[static_cast<std::size_t>(c)];
      for (const auto& [g, coef] : p.terms()) {
        const int var = y_offset + static_cast<int>(y_basis.index_of(rc + g));
        row.frees.push_back({var, -coef});
      }
      row.rhs = 0.0;
      sdp.equalities.push_back(std::move(row));
    }
  }
}

}  // namespace

int set_degree_bound(const SemialgebraicSet& set) {
  int d = 0;
  for (const auto& c : set.equalities) d = std::max(d, half_degree_up(c));
  for (const auto& c : set.inequalities) d = std::max(d, half_degree_up(c));
  return d;
}

int min_order(const UnionProblem& problem) {
  int k = half_degree_up(problem.objective);
  for (const auto& set : problem.sets) k = std::max(k, set_degree_bound(set));
  return std::max(k, 1);
}

AssembledRelaxation assemble_unified(const UnionProblem& problem, int k,
                                     double ball_radius) {
  check_problem(problem);
  if (k < min_order(problem)) throw std::invalid_argument("relaxation order too small");

  AssembledRelaxation rel;
  rel.problem = problem;
  rel.order = k;
  rel.num_sets = static_cast<int>(problem.sets.size());
  rel.ball_radius = ball_radius;

  const int n = problem.nvars;
  if (ball_radius > 0.0) {
    const Polynomial ball = ball_polynomial(n, ball_radius);
    for (auto& set : rel.problem.sets) set.inequalities.push_back(ball);
  }

  const MonomialBasis y_basis(n, 2 * k);
  rel.y_dim = static_cast<int>(y_basis.size());

  SDPProblem& sdp = rel.sdp;
  sdp.num_free = rel.num_sets * rel.y_dim;

  // declare all blocks first so pinning rows can reference them freely
  std::vector<std::vector<Polynomial>> scaled_ineqs(rel.problem.sets.size());
  for (int l = 0; l < rel.num_sets; ++l) {
    const SemialgebraicSet& set = rel.problem.sets[static_cast<std::size_t>(l)];
    rel.y_offset.push_back(l * rel.y_dim);
    rel.set_dl.push_back(set_degree_bound(set));

    rel.moment_block.push_back(sdp.num_blocks());
    sdp.block_sides.push_back(static_cast<int>(MonomialBasis::dimension(n, k)));
    sdp.block_meta.push_back({l, "moment"});

    rel.ineq_block.emplace_back();
    rel.ineq_scale.emplace_back();
    for (std::size_t j = 0; j < set.inequalities.size(); ++j) {
      const Polynomial& c = set.inequalities[j];
      const double s = normalization(c);
      scaled_ineqs[static_cast<std::size_t>(l)].push_back(c * (1.0 / s));
      rel.ineq_scale.back().push_back(s);
      rel.ineq_block.back().push_back(sdp.num_blocks());
      const int side = static_cast<int>(MonomialBasis::dimension(n, k - half_degree_up(c)));
      sdp.block_sides.push_back(side);
      const bool is_ball = ball_radius > 0.0 && j + 1 == set.inequalities.size();
      sdp.block_meta.push_back({l, is_ball ? "ball" : "ineq:" + std::to_string(j)});
    }
  }

  for (int l = 0; l < rel.num_sets; ++l) {
    const SemialgebraicSet& set = rel.problem.sets[static_cast<std::size_t>(l)];
    const int off = rel.y_offset[static_cast<std::size_t>(l)];

    const MonomialBasis mk(n, k);
    pin_block_entries(sdp, rel.moment_block[static_cast<std::size_t>(l)],
                      static_cast<int>(mk.size()), off, mk, y_basis,
                      Polynomial::constant(n, 1.0));
    for (std::size_t j = 0; j < set.inequalities.size(); ++j) {
      const Polynomial& c = scaled_ineqs[static_cast<std::size_t>(l)][j];
      const MonomialBasis rows(n, k - half_degree_up(set.inequalities[j]));
      pin_block_entries(sdp, rel.ineq_block[static_cast<std::size_t>(l)][j],
                        static_cast<int>(rows.size()), off, rows, y_basis, c);
    }

    rel.eq_rows.emplace_back();
    rel.eq_scale.emplace_back();
    for (const auto& c : set.equalities) {
      const double s = normalization(c);
      rel.eq_scale.back().push_back(s);
      const Polynomial cs = c * (1.0 / s);
      const MonomialBasis xi(n, 2 * k - c.degree());
      std::vector<int> rows;
      for (const auto& e : xi.exponents()) {
        EqualityRow row;
        for (const auto& [g, coef] : cs.terms()) {
          const int var = off + static_cast<int>(y_basis.index_of(g + e));
          row.frees.push_back({var, coef});
        }
        row.rhs = 0.0;
        rows.push_back(static_cast<int>(sdp.equalities.size()));
        sdp.equalities.push_back(std::move(row));
      }
      rel.eq_rows.back().push_back(std::move(rows));
    }
  }

  EqualityRow coupling;
  for (int l = 0; l < rel.num_sets; ++l)
    coupling.frees.push_back({rel.y_offset[static_cast<std::size_t>(l)], 1.0});
  coupling.rhs = 1.0;
  rel.coupling_row = static_cast<int>(sdp.equalities.size());
  sdp.equalities.push_back(std::move(coupling));

  for (int l = 0; l < rel.num_sets; ++l) {
    const int off = rel.y_offset[static_cast<std::size_t>(l)];
    for (const auto& [e, coef] : problem.objective.terms())
      sdp.objective.frees.push_back({off + static_cast<int>(y_basis.index_of(e)), coef});
  }

  sdp.validate();
  return rel;
}

AssembledRelaxation assemble_individual(const SemialgebraicSet& set,
                                        const Polynomial& f, int k,
                                        double ball_radius) {
  UnionProblem single;
  single.nvars = f.nvars();
  single.objective = f;
  single.sets.push_back(set);
  return assemble_unified(single, k, ball_radius);
}

SOSCertificate extract_sos_certificate(const AssembledRelaxation& rel,
                                       const SDPSolution& sol) {
  if (sol.block_duals.size() != static_cast<std::size_t>(rel.sdp.num_blocks()) ||
      sol.eq_duals.size() != static_cast<Eigen::Index>(rel.sdp.equalities.size()))
    throw std::runtime_error("dual solution unavailable");

  const int n = rel.problem.nvars;
  SOSCertificate cert;
  cert.gamma = sol.eq_duals[rel.coupling_row];
  cert.residual = 0.0;

  for (int l = 0; l < rel.num_sets; ++l) {
    const SemialgebraicSet& set = rel.problem.sets[static_cast<std::size_t>(l)];
    SetCertificate sc;

    auto psd_project = [](const Eigen::MatrixXd& G) {
      Eigen::MatrixXd S = 0.5 * (G + G.transpose());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
      Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
      return Eigen::MatrixXd(es.eigenvectors() * lam.asDiagonal() *
                             es.eigenvectors().transpose());
    };

    sc.sigma0 = psd_project(
        sol.block_duals[static_cast<std::size_t>(rel.moment_block[static_cast<std::size_t>(l)])]);
    for (std::size_t j = 0; j < set.inequalities.size(); ++j) {
      const double s = rel.ineq_scale[static_cast<std::size_t>(l)][j];
      sc.ineq_grams.push_back(
          psd_project(sol.block_duals[static_cast<std::size_t>(
              rel.ineq_block[static_cast<std::size_t>(l)][j])]) *
          (1.0 / s));
    }
    for (std::size_t i = 0; i < set.equalities.size(); ++i) {
      const double s = rel.eq_scale[static_cast<std::size_t>(l)][i];
      const MonomialBasis xi(n, 2 * rel.order - set.equalities[i].degree());
      Polynomial phi(n);
      const auto& rows = rel.eq_rows[static_cast<std::size_t>(l)][i];
      for (std::size_t t = 0; t < rows.size(); ++t)
        phi.add_term(xi[t], sol.eq_duals[rows[t]] / s);
      sc.eq_multipliers.push_back(std::move(phi));
    }

    // residual of f - gamma = sum_i phi_i c_i + sigma_0 + sum_j c_j sigma_j
    Polynomial resid = rel.problem.objective - Polynomial::constant(n, cert.gamma);
    for (std::size_t i = 0; i < set.equalities.size(); ++i)
      resid = resid - sc.eq_multipliers[i] * set.equalities[i];
    auto gram_poly = [&](const Eigen::MatrixXd& G, int deg_cap) {
      const MonomialBasis b(n, deg_cap);
      Polynomial p(n);
      for (int r = 0; r < G.rows(); ++r)
        for (int c = 0; c < G.cols(); ++c)
          if (G(r, c) != 0.0)
            p.add_term(b[static_cast<std::size_t>(r)] + b[static_cast<std::size_t>(c)], G(r, c));
      return p;
    };
    resid = resid - gram_poly(sc.sigma0, rel.order);
    for (std::size_t j = 0; j < set.inequalities.size(); ++j)
      resid = resid - set.inequalities[j] *
                          gram_poly(sc.ineq_grams[j],
                                    rel.order - half_degree_up(set.inequalities[j]));
    cert.residual = std::max(cert.residual, resid.max_abs_coefficient());
    cert.per_set.push_back(std::move(sc));
  }

  cert.valid = cert.residual <= 1e-6;
  return cert;
}

}  // namespace umos
