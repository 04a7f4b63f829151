//
//  conic_solver.hpp
//
//  Embedded primal-dual interior-point solver for ConeProgram instances
//  (zero / nonnegative / second-order / PSD cones), based on the
//  homogeneous self-dual embedding with Nesterov-Todd scaling.
//

#pragma once

#include <Eigen/Dense>
#include <string>

#include "orpd/cone_program.hpp"

namespace orpd {

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalFailure, IterLimit };

const char* to_string(SolveStatus s);

struct SolveOptions {
  double tolerance = 1e-8;        // residuals and relative duality gap
  int max_iterations = 200;
  double time_limit_seconds = 600.0;
  bool verbose = false;
};

struct SolverResult {
  SolveStatus status = SolveStatus::NumericalFailure;
  Eigen::VectorXd x;      // primal values (Optimal and IterLimit only)
  Eigen::VectorXd duals;  // per program row: y for Zero rows, z otherwise
  double objective = std::numeric_limits<double>::quiet_NaN();
  double solve_time = 0.0;
  int iterations = 0;
  double primal_residual = std::numeric_limits<double>::quiet_NaN();
  double dual_residual = std::numeric_limits<double>::quiet_NaN();
  double relative_gap = std::numeric_limits<double>::quiet_NaN();
  std::string message;

  bool has_solution() const {
    return status == SolveStatus::Optimal || status == SolveStatus::IterLimit;
  }
};

SolverResult solve(const ConeProgram& prog, const SolveOptions& opts = {});

}  // namespace orpd
