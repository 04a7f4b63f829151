#include <complex>
#include <random>

#include "doctest.h"
#include "orpd/acopf.hpp"
#include "orpd/case_io.hpp"

using namespace orpd;
using cx = std::complex<double>;

static std::string data_path(const std::string& f) {
  return std::string(ORPD_DATA_DIR) + "/" + f;
}

static Network load(const std::string& f) {
  return build_network(parse_case_file(data_path(f)));
}

namespace {

DiscreteAssignment nominal_assignment(const RawCase& raw, const Network& net) {
  DiscreteAssignment asg;
  asg.u_round.assign(net.shunts.size(), 1.0);
  int id = 0;
  for (const auto& row : raw.branch_rows) {
    if (row[col::BR_STATUS] == 0) continue;
    if (row[col::TAP] != 0.0)
      asg.t_round[id] = tap_grid_round(*net.branches[id].tap, row[col::TAP]);
    ++id;
  }
  return asg;
}

OperatingPoint stored_profile(const Network& net) {
  OperatingPoint pt;
  for (const Bus& b : net.buses)
    pt.v.push_back(std::polar(b.vm_init, b.va_init));
  for (const Generator& g : net.generators) {
    pt.p_gen.push_back(g.pg_init);
    pt.q_gen.push_back(g.qg_init);
  }
  return pt;
}

}  // namespace

TEST_CASE("residuals: single-bus balance") {
  RawCase raw;
  raw.base_mva = 100;
  raw.bus_rows = {{1, 3, 50, 20, 0, 0, 1, 1, 0, 0, 1, 1.1, 0.9}};
  raw.gen_rows = {{1, 50, 20, 100, -100, 1, 100, 1, 100, 0}};
  raw.branch_rows.clear();
  // single bus, no branches: connectivity is trivially satisfied
  Network net = build_network(raw);
  DiscreteAssignment asg;
  OperatingPoint pt;
  pt.v = {cx(1, 0)};
  pt.p_gen = {0.5};
  pt.q_gen = {0.2};
  auto res = residuals(net, asg, pt);
  for (double r : res) CHECK(std::abs(r) <= 1e-12);
}

TEST_CASE("residuals match an independent bus-injection computation") {
  RawCase raw = parse_case_file(data_path("case14.m"));
  Network net = build_network(raw);
  DiscreteAssignment asg = nominal_assignment(raw, net);
  OperatingPoint pt = stored_profile(net);
  auto res = residuals(net, asg, pt);

  // first-principles mismatch: assemble the bus admittance matrix and
  // compute S_k = v_k * conj(sum_m Y_km v_m)
  const int n = net.bus_count();
  Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, n);
  for (const Branch& br : net.branches) {
    double t = br.is_tap() ? asg.t_round.at(br.id) : 1.0;
    cx y = br.series_admittance;
    cx bc(0, br.shunt_susceptance_total / 2.0);
    int k = br.from_bus, m = br.to_bus;
    Y(k, k) += (y + bc) / (t * t);
    Y(m, m) += y + bc;
    Y(k, m) += -y / t;
    Y(m, k) += -y / t;
  }
  for (size_t i = 0; i < net.shunts.size(); ++i) {
    double u = asg.u_round[i];
    Y(net.shunts[i].bus, net.shunts[i].bus) +=
        u * cx(net.shunts[i].g_shunt, net.shunts[i].b_shunt);
  }
  for (int k = 0; k < n; ++k) {
    cx inj = 0;
    for (int m = 0; m < n; ++m) inj += Y(k, m) * pt.v[m];
    cx s = pt.v[k] * std::conj(inj);
    double pg = 0, qg = 0;
    for (int g : net.gens_by_bus[k]) {
      pg += pt.p_gen[g];
      qg += pt.q_gen[g];
    }
    double pref = pg - net.buses[k].p_demand - s.real();
    double qref = qg - net.buses[k].q_demand - s.imag();
    CHECK(res[k] == doctest::Approx(pref).epsilon(1e-9));
    CHECK(res[n + k] == doctest::Approx(qref).epsilon(1e-9));
  }
}

TEST_CASE("case14 local solve near the published nominal optimum") {
  RawCase raw = parse_case_file(data_path("case14.m"));
  Network net = build_network(raw);
  DiscreteAssignment asg = nominal_assignment(raw, net);
  // exact nominal ratios rather than grid-rounded, to compare with the
  // standard dispatch result for this case
  int id = 0;
  for (const auto& row : raw.branch_rows) {
    if (row[col::BR_STATUS] == 0) continue;
    if (row[col::TAP] != 0.0) asg.t_round[id] = row[col::TAP];
    ++id;
  }
  LocalSolveOptions lopts;
  lopts.objective = Objective::Cost;
  LocalSolveResult r = solve_subproblem(net, asg, std::nullopt, lopts);
  REQUIRE(r.status == LocalStatus::LocalOptimal);
  CHECK(r.objective == doctest::Approx(8081.53).epsilon(2e-4));
  CHECK(r.max_violation <= 1e-6);
  CHECK(r.stationarity <= 1e-6);
  // independent feasibility recheck
  CHECK(residual_norm(net, asg, r.point) <= 1e-6);
}

TEST_CASE("case30 and case57 local solves near published nominal optima") {
  {
    RawCase raw = parse_case_file(data_path("case30.m"));
    Network net = build_network(raw);
    DiscreteAssignment asg = nominal_assignment(raw, net);
    LocalSolveOptions lopts;
    LocalSolveResult r = solve_subproblem(net, asg, std::nullopt, lopts);
    REQUIRE(r.feasible());
    CHECK(r.objective == doctest::Approx(576.89).epsilon(2e-4));
  }
  {
    RawCase raw = parse_case_file(data_path("case57.m"));
    Network net = build_network(raw);
    DiscreteAssignment asg = nominal_assignment(raw, net);
    int id = 0;
    for (const auto& row : raw.branch_rows) {
      if (row[col::BR_STATUS] == 0) continue;
      if (row[col::TAP] != 0.0) asg.t_round[id] = row[col::TAP];
      ++id;
    }
    LocalSolveOptions lopts;
    LocalSolveResult r = solve_subproblem(net, asg, std::nullopt, lopts);
    REQUIRE(r.feasible());
    CHECK(r.objective == doctest::Approx(41737.79).epsilon(5e-4));
  }
}

TEST_CASE("warm and cold starts agree on case14") {
  RawCase raw = parse_case_file(data_path("case14.m"));
  Network net = build_network(raw);
  DiscreteAssignment asg = nominal_assignment(raw, net);
  LocalSolveOptions lopts;
  LocalSolveResult cold = solve_subproblem(net, asg, std::nullopt, lopts);
  OperatingPoint warm = stored_profile(net);
  LocalSolveResult warmres = solve_subproblem(net, asg, warm, lopts);
  REQUIRE(cold.feasible());
  REQUIRE(warmres.feasible());
  CHECK(cold.objective == doctest::Approx(warmres.objective).epsilon(1e-4));
}

TEST_CASE("weak duality: local objective above the relaxation-free floor") {
  RawCase raw = parse_case_file(data_path("case14.m"));
  Network net = build_network(raw);
  DiscreteAssignment asg = nominal_assignment(raw, net);
  LocalSolveOptions lopts;
  LocalSolveResult r = solve_subproblem(net, asg, std::nullopt, lopts);
  REQUIRE(r.feasible());
  // any feasible dispatch is at least as expensive as the known bound
  CHECK(r.objective >= 8078.62 - 1e-3);
}

TEST_CASE("upper_bound_select picks the smallest feasible objective") {
  LocalSolveResult a, b, c;
  a.status = LocalStatus::LocalOptimal;
  a.objective = 8079.1;
  b.status = LocalStatus::FeasibleOnly;
  b.objective = 8078.75;
  c.status = LocalStatus::Diverged;
  c.objective = 1.0;
  CHECK(upper_bound_select({a, b, c}) == doctest::Approx(8078.75));
  CHECK_THROWS_AS(upper_bound_select({c}), NoFeasibleUpperBound);
}

TEST_CASE("infeasible subproblem is reported, not fabricated") {
  RawCase raw = parse_case_file(data_path("case14.m"));
  // demand far beyond total generation capacity
  for (auto& row : raw.bus_rows) row[col::PD] *= 50.0;
  Network net = build_network(raw);
  DiscreteAssignment asg = nominal_assignment(raw, net);
  LocalSolveOptions lopts;
  lopts.max_iterations = 150;
  LocalSolveResult r = solve_subproblem(net, asg, std::nullopt, lopts);
  CHECK_FALSE(r.feasible());
}
