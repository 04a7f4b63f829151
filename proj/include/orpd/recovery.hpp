//
//  recovery.hpp
//
//  Extraction of continuous shunt/tap settings from a relaxation solution,
//  rounding to the discrete grids, and the optimality-gap measure.
//

#pragma once

#include <complex>
#include <map>
#include <stdexcept>
#include <vector>

#include "orpd/conic_solver.hpp"
#include "orpd/relaxations.hpp"

namespace orpd {

// Numeric view of a solved relaxation, decoupled from variable indexing.
struct RelaxationSolution {
  RelaxationKind kind;
  SolveStatus status = SolveStatus::NumericalFailure;
  double bound = std::numeric_limits<double>::quiet_NaN();  // display units
  double solve_time = 0;
  int iterations = 0;

  std::vector<double> v_diag;                    // V_kk per bus
  std::vector<double> xi;                        // per shunt
  std::map<int, std::array<double, 4>> tap;      // w_ll, w_kl, w_lm re/im
  std::vector<double> pg, qg, pf, qf, pt, qt;
  std::vector<std::complex<double>> v_rect;      // TCR kinds only
  std::map<std::pair<int, int>, std::complex<double>> v_off;

  bool usable() const {
    return status == SolveStatus::Optimal || status == SolveStatus::IterLimit;
  }
};

// Pulls the lifted values out of a solver result.
RelaxationSolution extract_solution(const Network& net,
                                    const BuiltRelaxation& built,
                                    const SolverResult& res);

struct DiscreteAssignment {
  std::vector<double> u_hat;       // per shunt, in [0,1]
  std::map<int, double> t_hat;     // per tap branch, in [t_min, t_max]
  std::vector<double> u_round;     // 0 or 1
  std::map<int, double> t_round;   // on the tap grid
  std::vector<Diagnostic> diags;
};

class NonpositiveVkk : public std::runtime_error {
 public:
  explicit NonpositiveVkk(int bus)
      : std::runtime_error("V_kk is not positive at bus " +
                           std::to_string(bus)) {}
};
class NonpositiveWll : public std::runtime_error {
 public:
  explicit NonpositiveWll(int branch)
      : std::runtime_error("W_ll is not positive at branch " +
                           std::to_string(branch)) {}
};
class RecoveredValueOutOfRange : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// u_hat = xi / V_kk, t_hat = sqrt(V_kk / W_ll); values leaking their range
// by <= 1e-6 clamp silently (with a diagnostic), larger violations raise.
DiscreteAssignment recover_continuous(const Network& net,
                                      const RelaxationSolution& sol);

// nearest discrete values; u ties round to 1
DiscreteAssignment round_assignment(const Network& net,
                                    DiscreteAssignment cont);

class NonpositiveUpper : public std::runtime_error {
 public:
  NonpositiveUpper() : std::runtime_error("upper bound must be positive") {}
};

// 100 (1 - bound/upper), in percent
double optimality_gap(double bound, double upper);

}  // namespace orpd
