//
//  acopf.hpp
//
//  Continuous dispatch subproblem with fixed shunt/tap settings:
//  residual evaluation and a local interior-point solve in rectangular
//  voltage coordinates.
//

#pragma once

#include <optional>
#include <vector>

#include "orpd/network.hpp"
#include "orpd/recovery.hpp"

namespace orpd {

enum class LocalStatus { LocalOptimal, FeasibleOnly, Infeasible, Diverged };

const char* to_string(LocalStatus s);

struct LocalSolveResult {
  OperatingPoint point;
  double objective = std::numeric_limits<double>::quiet_NaN();  // $/h or MW
  LocalStatus status = LocalStatus::Diverged;
  double max_violation = std::numeric_limits<double>::quiet_NaN();
  double stationarity = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double solve_time = 0;

  bool feasible() const {
    return status == LocalStatus::LocalOptimal ||
           status == LocalStatus::FeasibleOnly;
  }
};

struct LocalSolveOptions {
  double feas_tol = 1e-8;
  double opt_tol = 1e-8;
  int max_iterations = 400;
  double time_limit_seconds = 600.0;
  Objective objective = Objective::Cost;
  bool verbose = false;
};

// Signed violations of every dispatch constraint at the point, discretes
// fixed: equalities report their mismatch, inequalities max(0, excess).
// Layout: [P balance (n), Q balance (n), ref angle (1), vmag lo (n),
//          vmag hi (n), gen boxes (4 ng), thermal (2 per limited branch)].
std::vector<double> residuals(const Network& net,
                              const DiscreteAssignment& asg,
                              const OperatingPoint& point);

double residual_norm(const Network& net, const DiscreteAssignment& asg,
                     const OperatingPoint& point);

// Local solve of the fixed-discretes dispatch problem; the warm start is
// optional and a flat start is used as restoration fallback.
LocalSolveResult solve_subproblem(const Network& net,
                                  const DiscreteAssignment& asg,
                                  const std::optional<OperatingPoint>& warm,
                                  const LocalSolveOptions& opts = {});

class NoFeasibleUpperBound : public std::runtime_error {
 public:
  NoFeasibleUpperBound()
      : std::runtime_error("no subproblem produced a feasible upper bound") {}
};

// smallest objective among feasible results
double upper_bound_select(const std::vector<LocalSolveResult>& results);

// Warm start assembled from a relaxation solution: magnitudes from sqrt of
// the lifted diagonal, angles propagated along a spanning tree from the
// reference bus, injections copied and clipped to their boxes.
OperatingPoint warm_start_from(const Network& net,
                               const RelaxationSolution& sol);

}  // namespace orpd
