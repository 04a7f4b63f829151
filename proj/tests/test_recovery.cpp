#include <random>

#include "doctest.h"
#include "orpd/acopf.hpp"
#include "orpd/case_io.hpp"
#include "orpd/conic_solver.hpp"
#include "orpd/recovery.hpp"

using namespace orpd;
using cx = std::complex<double>;

static std::string data_path(const std::string& f) {
  return std::string(ORPD_DATA_DIR) + "/" + f;
}

static Network load(const std::string& f) {
  return build_network(parse_case_file(data_path(f)));
}

namespace {

RelaxationSolution synthetic_solution(const Network& net, double alpha = 1.0) {
  RelaxationSolution sol;
  sol.kind = {RelaxationModel::SDR2, Objective::Cost, false};
  sol.status = SolveStatus::Optimal;
  sol.v_diag.assign(net.bus_count(), alpha * 1.0404);
  for (size_t i = 0; i < net.shunts.size(); ++i) sol.xi.push_back(0.0);
  for (int l : net.tap_branches) {
    double vkk = sol.v_diag[net.branches[l].from_bus];
    sol.tap[l] = {vkk / (1.0125 * 1.0125), vkk / 1.0125, 0.0, 0.0};
  }
  return sol;
}

}  // namespace

TEST_CASE("recovery formulas") {
  Network net = load("case14.m");
  RelaxationSolution sol = synthetic_solution(net);

  SUBCASE("xi = 0 gives u_hat = 0") {
    DiscreteAssignment a = recover_continuous(net, sol);
    CHECK(a.u_hat[0] == doctest::Approx(0.0));
  }
  SUBCASE("W_ll = V_kk gives t_hat = 1") {
    for (auto& [l, w] : sol.tap) {
      double vkk = sol.v_diag[net.branches[l].from_bus];
      w = {vkk, vkk, 0, 0};
    }
    DiscreteAssignment a = recover_continuous(net, sol);
    for (auto [l, t] : a.t_hat) CHECK(t == doctest::Approx(1.0));
  }
  SUBCASE("W_ll = V_kk / 1.0125^2 gives t_hat = 1.0125") {
    DiscreteAssignment a = recover_continuous(net, sol);
    for (auto [l, t] : a.t_hat) CHECK(t == doctest::Approx(1.0125).epsilon(1e-12));
  }
}

TEST_CASE("recovery is scale invariant") {
  Network net = load("case14.m");
  RelaxationSolution a = synthetic_solution(net, 1.0);
  RelaxationSolution b = synthetic_solution(net, 3.7);
  a.xi[0] = 0.5 * a.v_diag[net.shunts[0].bus];
  b.xi[0] = 0.5 * b.v_diag[net.shunts[0].bus];
  DiscreteAssignment da = recover_continuous(net, a);
  DiscreteAssignment db = recover_continuous(net, b);
  CHECK(da.u_hat[0] == doctest::Approx(db.u_hat[0]).epsilon(1e-12));
  for (auto [l, t] : da.t_hat)
    CHECK(t == doctest::Approx(db.t_hat[l]).epsilon(1e-12));
}

TEST_CASE("rounding rules and idempotence") {
  Network net = load("case14.m");
  RelaxationSolution sol = synthetic_solution(net);
  sol.xi[0] = 0.49 * sol.v_diag[net.shunts[0].bus];
  DiscreteAssignment a = round_assignment(net, recover_continuous(net, sol));
  CHECK(a.u_round[0] == 0.0);

  sol.xi[0] = 0.5 * sol.v_diag[net.shunts[0].bus];
  a = round_assignment(net, recover_continuous(net, sol));
  CHECK(a.u_round[0] == 1.0);  // tie rounds on

  // nearest grid values
  for (auto [l, t] : a.t_round) CHECK(t == doctest::Approx(1.0125));

  // idempotent: rounding a rounded assignment changes nothing
  DiscreteAssignment b = a;
  b.u_hat = a.u_round;
  b.t_hat = a.t_round;
  DiscreteAssignment c = round_assignment(net, b);
  CHECK(c.u_round == a.u_round);
  for (auto [l, t] : c.t_round) CHECK(t == doctest::Approx(a.t_round[l]));
}

TEST_CASE("errors: nonpositive inputs and out-of-range values") {
  Network net = load("case14.m");
  RelaxationSolution sol = synthetic_solution(net);
  SUBCASE("V_kk <= 0") {
    sol.v_diag[net.shunts[0].bus] = 0.0;
    CHECK_THROWS_AS(recover_continuous(net, sol), NonpositiveVkk);
  }
  SUBCASE("W_ll <= 0") {
    for (auto& [l, w] : sol.tap) w[0] = -1e-3;
    CHECK_THROWS_AS(recover_continuous(net, sol), NonpositiveWll);
  }
  SUBCASE("u_hat far above 1") {
    sol.xi[0] = 2.0 * sol.v_diag[net.shunts[0].bus];
    CHECK_THROWS_AS(recover_continuous(net, sol), RecoveredValueOutOfRange);
  }
  SUBCASE("small leakage clamps with a diagnostic") {
    sol.xi[0] = (1.0 + 5e-7) * sol.v_diag[net.shunts[0].bus];
    DiscreteAssignment a = recover_continuous(net, sol);
    CHECK(a.u_hat[0] == doctest::Approx(1.0));
    bool clamped = false;
    for (const auto& d : a.diags) clamped |= d.code == "RecoveryClamp";
    CHECK(clamped);
  }
}

TEST_CASE("optimality gap") {
  CHECK(optimality_gap(0.99, 1.00) == doctest::Approx(1.0));
  CHECK(optimality_gap(8078.62, 8078.75) ==
        doctest::Approx(100.0 * (1.0 - 8078.62 / 8078.75)));
  CHECK(optimality_gap(8078.62, 8078.75) < 0.005);  // prints as 0.00
  CHECK(optimality_gap(5.0, 5.0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(optimality_gap(1.0, 0.0), NonpositiveUpper);
}

TEST_CASE("round trip: lift integral discretes, recover them exactly") {
  Network net = load("case14.m");
  DiscreteAssignment asg;
  asg.u_round = {1.0};
  for (int l : net.tap_branches) asg.t_round[l] = 0.9625;
  LocalSolveOptions lopts;
  lopts.objective = Objective::Cost;
  LocalSolveResult local = solve_subproblem(net, asg, std::nullopt, lopts);
  REQUIRE(local.feasible());

  BuiltRelaxation built =
      build_relaxation(net, {RelaxationModel::SDR2, Objective::Cost, false});
  std::map<int, double> t;
  for (int l : net.tap_branches) t[l] = 0.9625;
  auto x = feasibility_embed(net, built, {1.0}, t, local.point);

  // read the lifted values back through the extraction path
  SolverResult fake;
  fake.status = SolveStatus::Optimal;
  fake.x = Eigen::Map<Eigen::VectorXd>(x.data(), x.size());
  fake.objective = built.program.objective_value(x);
  RelaxationSolution sol = extract_solution(net, built, fake);
  DiscreteAssignment rec = round_assignment(net, recover_continuous(net, sol));
  CHECK(rec.u_hat[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(rec.u_round[0] == 1.0);
  for (int l : net.tap_branches) {
    CHECK(rec.t_hat[l] == doctest::Approx(0.9625).epsilon(1e-10));
    CHECK(rec.t_round[l] == doctest::Approx(0.9625));
  }
}
