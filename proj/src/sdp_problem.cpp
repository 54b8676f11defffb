#include "umos/sdp.hpp"

#include <stdexcept>

namespace umos {

namespace {

void check_entry(const SDPProblem& p, const BlockEntryTerm& t, const char* where) {
  if (t.block < 0 || t.block >= p.num_blocks())
    throw std::invalid_argument(std::string(where) + ": block index out of range");
  int side = p.block_sides[t.block];
  if (t.row < 0 || t.col < t.row || t.col >= side)
    throw std::invalid_argument(std::string(where) + ": entry index out of range");
}

void check_free(const SDPProblem& p, const FreeTerm& t, const char* where) {
  if (t.var < 0 || t.var >= p.num_free)
    throw std::invalid_argument(std::string(where) + ": free variable out of range");
}

}  // namespace

void SDPProblem::validate() const {
  for (int side : block_sides)
    if (side < 1) throw std::invalid_argument("SDPProblem: block side must be >= 1");
  if (!block_meta.empty() && block_meta.size() != block_sides.size())
    throw std::invalid_argument("SDPProblem: block_meta size mismatch");
  if (num_free < 0) throw std::invalid_argument("SDPProblem: negative free count");
  for (const auto& row : equalities) {
    for (const auto& t : row.entries) check_entry(*this, t, "equality row");
    for (const auto& t : row.frees) check_free(*this, t, "equality row");
  }
  for (const auto& t : objective.entries) check_entry(*this, t, "objective");
  for (const auto& t : objective.frees) check_free(*this, t, "objective");
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::PrimalInfeasible: return "PrimalInfeasible";
    case SolveStatus::DualInfeasible: return "DualInfeasible";
    case SolveStatus::MaxIters: return "MaxIters";
    case SolveStatus::NumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

}  // namespace umos
