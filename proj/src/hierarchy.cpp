#include "umos/hierarchy.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

namespace umos {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Gauss-Newton projection of an extracted atom onto its set's constraint
// manifold (equalities plus any violated inequality); strips the O(solver
// accuracy) noise off the coordinates so feasibility checks see clean points.
void polish_atom(const SemialgebraicSet& set, std::vector<double>& u) {
  const int n = static_cast<int>(u.size());
  for (int pass = 0; pass < 8; ++pass) {
    std::vector<const Polynomial*> act;
    std::vector<double> val;
    for (const auto& c : set.equalities) {
      act.push_back(&c);
      val.push_back(c.evaluate(u));
    }
    for (const auto& c : set.inequalities) {
      const double v = c.evaluate(u);
      if (v < 0.0) {
        act.push_back(&c);
        val.push_back(v);
      }
    }
    if (act.empty()) return;
    double worst = 0.0;
    for (double v : val) worst = std::max(worst, std::abs(v));
    if (worst < 1e-13) return;
    Eigen::MatrixXd J(static_cast<Eigen::Index>(act.size()), n);
    Eigen::VectorXd r(static_cast<Eigen::Index>(act.size()));
    for (std::size_t i = 0; i < act.size(); ++i) {
      for (int s = 0; s < n; ++s) J(static_cast<Eigen::Index>(i), s) = act[i]->derivative(s).evaluate(u);
      r(static_cast<Eigen::Index>(i)) = -val[i];
    }
    Eigen::MatrixXd JJt = J * J.transpose();
    JJt.diagonal().array() += 1e-12 * (1.0 + JJt.diagonal().maxCoeff());
    const Eigen::VectorXd du = J.transpose() * JJt.ldlt().solve(r);
    for (int s = 0; s < n; ++s) u[static_cast<std::size_t>(s)] += du(s);
  }
}

// substitutes x -> r*x, i.e. scales each coefficient by r^|alpha|
Polynomial scale_vars(const Polynomial& p, double r) {
  Polynomial out(p.nvars());
  for (const auto& [e, c] : p.terms()) out.add_term(e, c * std::pow(r, e.degree()));
  return out;
}

struct CertifyAttempt {
  bool ok = false;
  FlatTruncationReport flat;
  std::vector<Atom> atoms;
};

// flat truncation, atom extraction and minimizer certification against the
// moment bound f_mom; atoms come back polished with set_index filled
CertifyAttempt try_certify(const UnionProblem& problem, const AssembledRelaxation& rel,
                           const SDPSolution& sol, int k, double f_mom,
                           const HierarchyOptions& opts) {
  CertifyAttempt out;
  std::vector<TMS> ys;
  std::vector<int> d_ls;
  int t_min = (problem.objective.degree() + 1) / 2;
  for (int l = 0; l < rel.num_sets; ++l) {
    ys.emplace_back(problem.nvars, 2 * k,
                    sol.free_values.segment(rel.y_offset[static_cast<std::size_t>(l)],
                                            rel.y_dim));
    const int dl = std::max(1, rel.set_dl[static_cast<std::size_t>(l)]);
    d_ls.push_back(dl);
    t_min = std::max(t_min, dl);
  }
  out.flat = check_flat_truncation(ys, d_ls, k, opts.y0_tol, opts.rank_tol, t_min);
  if (!out.flat.satisfied) return out;
  for (int l : out.flat.active_sets) {
    try {
      std::vector<Atom> part =
          extract_atoms(ys[static_cast<std::size_t>(l)], out.flat.t, opts.rank_tol);
      for (Atom& a : part) {
        a.set_index = l;
        polish_atom(problem.sets[static_cast<std::size_t>(l)], a.point);
      }
      out.atoms.insert(out.atoms.end(), part.begin(), part.end());
    } catch (const ExtractionError&) {
      out.atoms.clear();
      return out;
    }
  }
  out.ok = certify_minimizers(problem, out.atoms, f_mom, opts.feas_tol);
  if (!out.ok) out.atoms.clear();
  return out;
}

}  // namespace

std::string to_string(ReportStatus s) {
  switch (s) {
    case ReportStatus::OptimalCertified: return "OptimalCertified";
    case ReportStatus::LowerBoundOnly: return "LowerBoundOnly";
    case ReportStatus::Infeasible: return "Infeasible";
    case ReportStatus::SolverFailure: return "SolverFailure";
  }
  return "?";
}

SolveReport solve_union(const UnionProblem& problem, const HierarchyOptions& opts) {
  // With an enclosing ball given, solve in units of that ball: the rescaled
  // measure has all moments O(1), which the interior-point iteration needs
  // for terminal accuracy once atoms sit at norms well past 1.
  if (opts.ball_radius > 0.0 && opts.ball_radius != 1.0) {
    const double r = opts.ball_radius;
    UnionProblem scaled;
    scaled.nvars = problem.nvars;
    scaled.objective = scale_vars(problem.objective, r);
    scaled.sets.reserve(problem.sets.size());
    for (const SemialgebraicSet& K : problem.sets) {
      SemialgebraicSet S;
      for (const Polynomial& c : K.equalities) S.equalities.push_back(scale_vars(c, r));
      for (const Polynomial& c : K.inequalities) S.inequalities.push_back(scale_vars(c, r));
      scaled.sets.push_back(std::move(S));
    }
    HierarchyOptions unit = opts;
    unit.ball_radius = 1.0;
    SolveReport rep = solve_union(scaled, unit);
    for (Minimizer& m : rep.minimizers)
      for (double& v : m.point) v *= r;
    return rep;
  }

  const auto t_start = std::chrono::steady_clock::now();
  SolveReport report;
  report.timings = {{"assemble", 0.0}, {"solve", 0.0}, {"extract", 0.0}};

  const int k_min = std::max(min_order(problem), opts.order);
  const int k_max = std::max(k_min, opts.max_order < 0 ? min_order(problem) + 3 : opts.max_order);

  double best_bound = -std::numeric_limits<double>::infinity();
  for (int k = k_min; k <= k_max; ++k) {
    auto t0 = std::chrono::steady_clock::now();
    AssembledRelaxation rel = assemble_unified(problem, k, opts.ball_radius);
    report.timings["assemble"] += seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    SDPSolution sol = solve(rel.sdp, opts.solver);
    report.timings["solve"] += seconds_since(t0);

    if (sol.status == SolveStatus::PrimalInfeasible) {
      if (sol.certificate_residual >= 0.0 && sol.certificate_residual <= 1e-6) {
        report.status = ReportStatus::Infeasible;
        report.bound = std::numeric_limits<double>::infinity();
        report.timings["total"] = seconds_since(t_start);
        return report;
      }
      if (best_bound > -std::numeric_limits<double>::infinity()) break;
      report.status = ReportStatus::SolverFailure;
      report.timings["total"] = seconds_since(t_start);
      return report;
    }
    if (sol.status == SolveStatus::DualInfeasible) {
      // relaxation unbounded below at this order; a higher order may close it
      report.orders_tried.push_back({k, -std::numeric_limits<double>::infinity()});
      continue;
    }
    if (sol.status != SolveStatus::Optimal) {
      // A stalled solve whose best iterate is feasible on both sides still
      // carries information: min(pobj, dobj) under-estimates the relaxation
      // value to within the achieved accuracy, so record it and move on
      // rather than aborting the whole hierarchy.
      const double resid = std::max(sol.primal_infeasibility, sol.dual_infeasibility);
      if (resid <= 10.0 * opts.solver.accept_tol) {
        const double salvaged = std::min(sol.primal_obj, sol.dual_obj);
        report.orders_tried.push_back({k, salvaged});
        best_bound = std::max(best_bound, salvaged);
        report.bound = best_bound;
        continue;
      }
      if (best_bound > -std::numeric_limits<double>::infinity()) break;
      report.status = ReportStatus::SolverFailure;
      report.timings["total"] = seconds_since(t_start);
      return report;
    }

    const double f_mom = sol.primal_obj;
    report.orders_tried.push_back({k, f_mom});
    best_bound = std::max(best_bound, f_mom);
    report.bound = best_bound;

    t0 = std::chrono::steady_clock::now();
    CertifyAttempt attempt = try_certify(problem, rel, sol, k, f_mom, opts);
    report.flat_report = attempt.flat;
    report.timings["extract"] += seconds_since(t0);
    if (attempt.ok) {
      report.status = ReportStatus::OptimalCertified;
      report.bound = f_mom;
      report.minimizers = merge_atoms(attempt.atoms, 1e-4);
      report.timings["total"] = seconds_since(t_start);
      return report;
    }

    // Residual solver mass (up to gap / value-spread) parked on a non-optimal
    // set defeats both the rank test and the per-atom objective check.  When
    // the active sets split into heavy and trace-level ones, re-solve on the
    // heavy support alone; the screened certificate is accepted only if its
    // bound reproduces the full bound, which it cannot when a dropped set held
    // the true minimum.
    std::vector<int> heavy;
    bool trace_mass = false;
    for (int l = 0; l < rel.num_sets; ++l) {
      const double y0 = sol.free_values(rel.y_offset[static_cast<std::size_t>(l)]);
      if (y0 > 1e-3)
        heavy.push_back(l);
      else if (y0 > opts.y0_tol)
        trace_mass = true;
    }
    if (trace_mass && !heavy.empty() && heavy.size() < problem.sets.size()) {
      UnionProblem sub;
      sub.nvars = problem.nvars;
      sub.objective = problem.objective;
      for (int l : heavy) sub.sets.push_back(problem.sets[static_cast<std::size_t>(l)]);

      t0 = std::chrono::steady_clock::now();
      AssembledRelaxation srel = assemble_unified(sub, k, opts.ball_radius);
      report.timings["assemble"] += seconds_since(t0);
      t0 = std::chrono::steady_clock::now();
      SDPSolution ssol = solve(srel.sdp, opts.solver);
      report.timings["solve"] += seconds_since(t0);

      if (ssol.status == SolveStatus::Optimal &&
          std::abs(ssol.primal_obj - f_mom) <= 1e-6 * (1.0 + std::abs(f_mom))) {
        t0 = std::chrono::steady_clock::now();
        CertifyAttempt screened = try_certify(sub, srel, ssol, k, ssol.primal_obj, opts);
        report.timings["extract"] += seconds_since(t0);
        if (screened.ok) {
          for (Atom& a : screened.atoms)
            a.set_index = heavy[static_cast<std::size_t>(a.set_index)];
          for (int& l : screened.flat.active_sets)
            l = heavy[static_cast<std::size_t>(l)];
          std::map<int, std::pair<int, int>> ranks;
          for (const auto& [l, rk] : screened.flat.ranks)
            ranks[heavy[static_cast<std::size_t>(l)]] = rk;
          screened.flat.ranks = std::move(ranks);
          report.flat_report = screened.flat;
          report.status = ReportStatus::OptimalCertified;
          report.bound = ssol.primal_obj;
          report.minimizers = merge_atoms(screened.atoms, 1e-4);
          report.timings["total"] = seconds_since(t_start);
          return report;
        }
      }
    }
  }

  report.status = ReportStatus::LowerBoundOnly;
  report.timings["total"] = seconds_since(t_start);
  return report;
}

SolveReport solve_separate(const UnionProblem& problem, const HierarchyOptions& opts) {
  const auto t_start = std::chrono::steady_clock::now();
  SolveReport report;

  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t m = problem.sets.size();
  report.sub_reports.resize(m);

  std::vector<UnionProblem> singles(m);
  std::vector<int> cur_k(m), cap_k(m);
  for (std::size_t l = 0; l < m; ++l) {
    singles[l].nvars = problem.nvars;
    singles[l].objective = problem.objective;
    singles[l].sets.push_back(problem.sets[l]);
    const int k0 = min_order(singles[l]);
    cur_k[l] = std::max(k0, opts.order);
    cap_k[l] = std::max(cur_k[l], opts.max_order < 0 ? k0 + 3 : opts.max_order);
  }

  auto solve_one = [&](std::size_t l) {
    HierarchyOptions po = opts;
    po.order = cur_k[l];
    po.max_order = cur_k[l];
    std::vector<std::pair<int, double>> hist = std::move(report.sub_reports[l].orders_tried);
    try {
      report.sub_reports[l] = solve_union(singles[l], po);
    } catch (const std::exception&) {
      report.sub_reports[l] = {};
      report.sub_reports[l].status = ReportStatus::SolverFailure;
    }
    auto& trace = report.sub_reports[l].orders_tried;
    trace.insert(trace.begin(), hist.begin(), hist.end());
  };
  auto run_batch = [&](const std::vector<std::size_t>& todo) {
    const unsigned workers = std::min<unsigned>(std::max(1u, std::thread::hardware_concurrency()),
                                                static_cast<unsigned>(todo.size()));
    if (workers <= 1) {
      for (std::size_t l : todo) solve_one(l);
      return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < todo.size();) solve_one(todo[i]);
      });
    for (std::thread& th : pool) th.join();
  };

  std::vector<std::size_t> batch(m);
  for (std::size_t l = 0; l < m; ++l) batch[l] = l;
  run_batch(batch);

  // Escalate lazily: a set whose bound already sits at or above the best
  // certified value cannot hide the minimum, so only failed sets and sets
  // bounded below that value are worth re-solving at a higher order.
  for (;;) {
    double best_cert = inf;
    for (const SolveReport& sub : report.sub_reports)
      if (sub.status == ReportStatus::OptimalCertified) best_cert = std::min(best_cert, sub.bound);
    batch.clear();
    for (std::size_t l = 0; l < m; ++l) {
      const SolveReport& sub = report.sub_reports[l];
      const bool blocks =
          sub.status == ReportStatus::SolverFailure ||
          (sub.status == ReportStatus::LowerBoundOnly &&
           (best_cert == inf || sub.bound < best_cert - 1e-9 * (1.0 + std::abs(best_cert))));
      if (blocks && cur_k[l] < cap_k[l]) {
        ++cur_k[l];
        batch.push_back(l);
      }
    }
    if (batch.empty()) break;
    run_batch(batch);
  }

  bool any_failure = false, all_infeasible = true;
  double best_cert = inf, best_lb = inf;
  for (const SolveReport& sub : report.sub_reports) {
    switch (sub.status) {
      case ReportStatus::OptimalCertified:
        all_infeasible = false;
        best_cert = std::min(best_cert, sub.bound);
        best_lb = std::min(best_lb, sub.bound);
        break;
      case ReportStatus::LowerBoundOnly:
        all_infeasible = false;
        best_lb = std::min(best_lb, sub.bound);
        break;
      case ReportStatus::Infeasible:
        break;
      case ReportStatus::SolverFailure:
        any_failure = true;
        break;
    }
  }
  // a merely lower-bounded set cannot hide a better minimum when its bound
  // already sits at or above the best certified value
  bool certified = !any_failure && best_cert < inf;
  for (const SolveReport& sub : report.sub_reports)
    if (sub.status == ReportStatus::LowerBoundOnly &&
        sub.bound < best_cert - 1e-9 * (1.0 + std::abs(best_cert)))
      certified = false;

  if (any_failure) {
    report.status = ReportStatus::SolverFailure;
  } else if (all_infeasible) {
    report.status = ReportStatus::Infeasible;
    report.bound = inf;
  } else if (certified) {
    report.status = ReportStatus::OptimalCertified;
    report.bound = best_cert;
    std::vector<Atom> atoms;
    double mass = 0.0;
    for (std::size_t l = 0; l < report.sub_reports.size(); ++l) {
      const SolveReport& sub = report.sub_reports[l];
      if (sub.status != ReportStatus::OptimalCertified) continue;
      if (sub.bound > best_cert + 1e-6 * (1.0 + std::abs(best_cert))) continue;
      for (const Minimizer& m : sub.minimizers) {
        atoms.push_back({m.point, m.weight, static_cast<int>(l)});
        mass += m.weight;
      }
    }
    for (Atom& a : atoms) a.weight /= mass;
    report.minimizers = merge_atoms(atoms, 1e-4);
  } else {
    report.status = ReportStatus::LowerBoundOnly;
    report.bound = best_lb;
  }

  // union the per-set order traces for reference (k, min over sets at that k)
  std::map<int, double> by_order;
  for (const SolveReport& sub : report.sub_reports)
    for (const auto& [k, v] : sub.orders_tried) {
      auto it = by_order.find(k);
      by_order[k] = it == by_order.end() ? v : std::min(it->second, v);
    }
  for (const auto& [k, v] : by_order) report.orders_tried.push_back({k, v});

  report.timings["total"] = seconds_since(t_start);
  return report;
}

}  // namespace umos
