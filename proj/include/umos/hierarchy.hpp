#pragma once

// Top-level driver: escalate the relaxation order until flat truncation
// certifies the bound and the extracted atoms pass feasibility checks, or
// the order budget runs out.  Either the unified relaxation of the whole
// union is solved per order, or each set runs its own standard hierarchy
// and the certified minima are combined.

#include <map>
#include <string>
#include <vector>

#include "umos/extraction.hpp"
#include "umos/relaxation.hpp"

namespace umos {

enum class ReportStatus {
  OptimalCertified,
  LowerBoundOnly,
  Infeasible,
  SolverFailure,
};

std::string to_string(ReportStatus s);

struct HierarchyOptions {
  int order = -1;      // starting order override (clamped up to min_order)
  int max_order = -1;  // default: min_order + 3
  double rank_tol = 1e-6;
  double y0_tol = 1e-6;
  double feas_tol = 1e-6;  // minimizer certification tolerance
  double ball_radius = 0.0;
  SolverSettings solver;
};

struct SolveReport {
  ReportStatus status = ReportStatus::SolverFailure;
  std::vector<std::pair<int, double>> orders_tried;  // (k, f_mom_k)
  double bound = 0.0;
  std::vector<Minimizer> minimizers;
  FlatTruncationReport flat_report;
  std::map<std::string, double> timings;  // stage -> seconds
  std::vector<SolveReport> sub_reports;   // per set, in separate mode
};

SolveReport solve_union(const UnionProblem& problem, const HierarchyOptions& opts = {});

// per-set hierarchies; the union minimum is the smallest certified value
SolveReport solve_separate(const UnionProblem& problem, const HierarchyOptions& opts = {});

}  // namespace umos
