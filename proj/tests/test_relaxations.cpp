#include <cmath>
#include <random>

#include "doctest.h"
#include "orpd/acopf.hpp"
#include "orpd/case_io.hpp"
#include "orpd/conic_solver.hpp"
#include "orpd/recovery.hpp"
#include "orpd/relaxations.hpp"

using namespace orpd;
using cx = std::complex<double>;

static std::string data_path(const std::string& f) {
  return std::string(ORPD_DATA_DIR) + "/" + f;
}

static Network load(const std::string& f) {
  return build_network(parse_case_file(data_path(f)));
}

namespace {

// direct arithmetic oracle for the hull inequality on (x, z1, z2)
bool hull_holds(double tn, double tx, double x, double z1, double z2,
                double tol = 1e-12) {
  return x + tn * tx * z2 <= (tn + tx) * z1 + tol;
}

double solve_bound(const Network& net, RelaxationModel m, Objective o,
                   bool chordal) {
  BuiltRelaxation built = build_relaxation(net, {m, o, chordal, false});
  SolveOptions opts;
  opts.tolerance = 1.49e-8;
  SolverResult r = solve(built.program, opts);
  REQUIRE(r.has_solution());
  return r.objective;
}

}  // namespace

TEST_CASE("tap envelope rows per kind") {
  const double tn = 0.9, tx = 1.1;
  ConeProgram p;
  int vkk = p.add_variable("vkk"), wkl = p.add_variable("wkl"),
      wll = p.add_variable("wll");
  auto count_rows = [&](RelaxationModel m, bool box = false) {
    ConeProgram q;
    q.add_variable("vkk");
    q.add_variable("wkl");
    q.add_variable("wll");
    tap_envelope_rows(q, {m, Objective::Cost, false, box}, tn, tx,
                      LinExpr::variable(0), LinExpr::variable(1),
                      LinExpr::variable(2));
    return q.num_rows();
  };
  CHECK(count_rows(RelaxationModel::SDR1) == 2);   // one-sided pair
  CHECK(count_rows(RelaxationModel::TCR1) == 4);   // two-sided bounds
  CHECK(count_rows(RelaxationModel::SDR2) == 1);   // hull row only
  CHECK(count_rows(RelaxationModel::TCR2) == 1);
  CHECK(count_rows(RelaxationModel::TCR2, true) == 5);  // optional box kept

  // degenerate range: substitution equalities
  tap_envelope_rows(p, {RelaxationModel::SDR2, Objective::Cost, false, false},
                    1.05, 1.05, LinExpr::variable(vkk), LinExpr::variable(wkl),
                    LinExpr::variable(wll));
  REQUIRE(p.blocks().size() == 2);
  CHECK(p.blocks()[0].cone == Cone::Zero);
  std::vector<double> pt = {1.0, 1.0 / 1.05, 1.0 / (1.05 * 1.05)};
  CHECK(p.eval_row(0, pt) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(p.eval_row(1, pt) == doctest::Approx(0.0).epsilon(1e-14));

  CHECK_THROWS_AS(
      tap_envelope_rows(p, {RelaxationModel::SDR2, Objective::Cost, false,
                            false},
                        1.1, 0.9, LinExpr::variable(vkk),
                        LinExpr::variable(wkl), LinExpr::variable(wll)),
      DegenerateTapRange);
}

TEST_CASE("hull inequality examples") {
  // boundary tap: equality
  double x = 1.0, t = 1.1;
  CHECK(x + 0.9 * 1.1 * (x / (t * t)) ==
        doctest::Approx((0.9 + 1.1) * (x / t)).epsilon(1e-12));
  // interior tap: strict
  CHECK(1.0 + 0.99 * 1.0 < 2.0 * 1.0);
  // outside the box the hull cuts the point off
  CHECK_FALSE(hull_holds(0.9, 1.1, 1.0, 1.0 / 0.8, 1.0 / 0.64));
}

TEST_CASE("hull oracle: 10k samples inside the box, equality only at ends") {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> ux(0.81, 1.21), ut(0.9, 1.1);
  const double tn = 0.9, tx = 1.1;
  for (int i = 0; i < 10000; ++i) {
    double x = ux(rng);
    double t = (i % 100 == 0) ? (i % 200 == 0 ? 0.9 : 1.1) : ut(rng);
    double z1 = x / t, z2 = x / (t * t);
    double lhs = x + tn * tx * z2, rhs = (tn + tx) * z1;
    REQUIRE(lhs <= rhs + 1e-12);
    bool at_end = std::abs(t - tn) < 1e-12 || std::abs(t - tx) < 1e-12;
    if (at_end)
      REQUIRE(std::abs(lhs - rhs) <= 1e-9);
    else
      REQUIRE(lhs < rhs - 1e-15);
  }
  // out-of-box taps violate the hull
  int cut = 0;
  for (double t : {0.8, 1.2, 0.85, 1.15}) {
    double x = 1.0;
    if (!hull_holds(tn, tx, x, x / t, x / (t * t))) ++cut;
  }
  CHECK(cut == 4);
}

TEST_CASE("program structure: case30 has no W blocks and two xi variables") {
  Network net = load("case30.m");
  BuiltRelaxation b =
      build_relaxation(net, {RelaxationModel::SDR1, Objective::Cost, false});
  CHECK(b.vars.tap.empty());
  CHECK(b.vars.xi.size() == 2);
  // SDR1 == SDR2 row-for-row when |T| = 0
  BuiltRelaxation b2 =
      build_relaxation(net, {RelaxationModel::SDR2, Objective::Cost, false});
  REQUIRE(b.program.num_rows() == b2.program.num_rows());
  REQUIRE(b.program.blocks().size() == b2.program.blocks().size());
  for (int r = 0; r < b.program.num_rows(); ++r) {
    CHECK(b.program.row(r).terms == b2.program.row(r).terms);
    CHECK(b.program.row(r).constant == b2.program.row(r).constant);
  }
  // same for the TCR pair
  BuiltRelaxation t1 =
      build_relaxation(net, {RelaxationModel::TCR1, Objective::Cost, false});
  BuiltRelaxation t2 =
      build_relaxation(net, {RelaxationModel::TCR2, Objective::Cost, false});
  REQUIRE(t1.program.num_rows() == t2.program.num_rows());
  for (int r = 0; r < t1.program.num_rows(); ++r)
    CHECK(t1.program.row(r).terms == t2.program.row(r).terms);
}

TEST_CASE("flat point on an unloaded lossless toy network embeds feasibly") {
  // 3-bus ring, no loads, one generator, lossless lines
  RawCase raw;
  raw.name = "toy3";
  raw.base_mva = 100;
  raw.bus_rows = {
      {1, 3, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1.1, 0.9},
      {2, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1.1, 0.9},
      {3, 1, 0, 0, 0, 19, 1, 1, 0, 0, 1, 1.1, 0.9},
  };
  raw.gen_rows = {{1, 0, 0, 50, -50, 1, 100, 1, 100, -100}};
  raw.branch_rows = {
      {1, 2, 0, 0.1, 0, 0, 0, 0, 0, 0, 1, -360, 360},
      {2, 3, 0, 0.2, 0, 0, 0, 0, 0, 0, 1, -360, 360},
      {1, 3, 0, 0.25, 0, 0, 0, 0, 0.9875, 0, 1, -360, 360},
  };
  raw.gencost_rows = {{2, 0, 0, 3, 0.01, 40, 0}};
  Network net = build_network(raw);
  REQUIRE(net.tap_branches.size() == 1);
  REQUIRE(net.shunts.size() == 1);

  OperatingPoint pt;
  pt.v = {cx(1, 0), cx(1, 0), cx(1, 0)};
  pt.p_gen = {0.0};
  pt.q_gen = {0.0};
  std::vector<double> u = {0.0};
  std::map<int, double> t = {{2, 1.0}};

  for (RelaxationModel m : {RelaxationModel::SDR1, RelaxationModel::TCR1,
                            RelaxationModel::SDR2, RelaxationModel::TCR2}) {
    for (Objective o : {Objective::Cost, Objective::Loss}) {
      BuiltRelaxation built = build_relaxation(net, {m, o, false});
      auto x = feasibility_embed(net, built, u, t, pt);
      CHECK(max_violation(built.program, x) <= 1e-9);
    }
  }
}

TEST_CASE("rank-one containment: rounded local optimum is feasible in all four") {
  Network net = load("case14.m");
  // discretes: shunt on, taps at grid values
  DiscreteAssignment asg;
  asg.u_round = {1.0};
  for (int l : net.tap_branches) asg.t_round[l] = 0.975;
  LocalSolveOptions lopts;
  lopts.objective = Objective::Cost;
  LocalSolveResult local = solve_subproblem(net, asg, std::nullopt, lopts);
  REQUIRE(local.status == LocalStatus::LocalOptimal);

  std::vector<double> u = {1.0};
  std::map<int, double> t;
  for (int l : net.tap_branches) t[l] = 0.975;
  for (RelaxationModel m : {RelaxationModel::SDR1, RelaxationModel::TCR1,
                            RelaxationModel::SDR2, RelaxationModel::TCR2}) {
    BuiltRelaxation built =
        build_relaxation(net, {m, Objective::Cost, false});
    auto x = feasibility_embed(net, built, u, t, local.point);
    CHECK(max_violation(built.program, x) <= 1e-8);
    // the lifted objective value matches the local objective
    CHECK(built.program.objective_value(x) ==
          doctest::Approx(local.objective).epsilon(1e-9));
  }
}

TEST_CASE("infeasible seed point is rejected") {
  Network net = load("case14.m");
  OperatingPoint pt;
  pt.v.assign(net.bus_count(), cx(1.2, 0));  // voltage bound violated
  pt.p_gen.assign(net.generators.size(), 0.0);
  pt.q_gen.assign(net.generators.size(), 0.0);
  std::vector<double> u = {1.0};
  std::map<int, double> t;
  for (int l : net.tap_branches) t[l] = 1.0;
  BuiltRelaxation built =
      build_relaxation(net, {RelaxationModel::SDR2, Objective::Cost, false});
  CHECK_THROWS_AS(feasibility_embed(net, built, u, t, pt),
                  InfeasibleSeedPoint);
}

TEST_CASE("relaxation ordering on case14 within tolerance") {
  Network net = load("case14.m");
  double sdr1 = solve_bound(net, RelaxationModel::SDR1, Objective::Cost, false);
  double tcr1 = solve_bound(net, RelaxationModel::TCR1, Objective::Cost, false);
  double sdr2 = solve_bound(net, RelaxationModel::SDR2, Objective::Cost, false);
  double tcr2 = solve_bound(net, RelaxationModel::TCR2, Objective::Cost, false);
  double tol = 10 * 1.49e-8 * std::abs(sdr2);
  CHECK(tcr1 <= sdr1 + tol);
  CHECK(tcr2 <= sdr2 + tol);
  CHECK(tcr1 <= tcr2 + tol);
  CHECK(sdr1 <= sdr2 + tol);
}

TEST_CASE("case14 SDR2 cost bound and chordal equivalence") {
  Network net = load("case14.m");
  double full = solve_bound(net, RelaxationModel::SDR2, Objective::Cost, false);
  CHECK(full == doctest::Approx(8078.62).epsilon(5e-4));
  double decomposed =
      solve_bound(net, RelaxationModel::SDR1, Objective::Cost, true);
  double full1 = solve_bound(net, RelaxationModel::SDR1, Objective::Cost, false);
  CHECK(decomposed == doctest::Approx(full1).epsilon(1e-6));
}

TEST_CASE("lifted flow rows match a rank-one substitution") {
  // random voltages, random branch data: the flow rows evaluated on the
  // lifted point reproduce branch_flow exactly
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> U(-0.5, 0.5);
  Network net = load("case14.m");
  BuiltRelaxation built =
      build_relaxation(net, {RelaxationModel::SDR2, Objective::Cost, false});
  OperatingPoint pt;
  for (int k = 0; k < net.bus_count(); ++k)
    pt.v.push_back(std::polar(1.0 + 0.05 * U(rng), 0.2 * U(rng)));
  pt.p_gen.assign(net.generators.size(), 0.0);
  pt.q_gen.assign(net.generators.size(), 0.0);

  // build the lifted vector directly (skip the feasibility precheck)
  const LiftedVars& v = built.vars;
  std::vector<double> x(built.program.num_variables(), 0.0);
  std::map<int, double> t;
  for (int l : net.tap_branches) t[l] = 1.0375;
  for (int k = 0; k < net.bus_count(); ++k) x[v.v_diag[k]] = std::norm(pt.v[k]);
  for (const auto& [key, handles] : v.v_off) {
    cx val = pt.v[key.first] * std::conj(pt.v[key.second]);
    x[handles.first] = val.real();
    x[handles.second] = val.imag();
  }
  for (const auto& [l, tl] : v.tap) {
    const Branch& br = net.branches[l];
    cx w = pt.v[br.from_bus] / t[l];
    x[tl.w_ll] = std::norm(w);
    x[tl.w_kl] = (pt.v[br.from_bus] * std::conj(w)).real();
    cx wlm = w * std::conj(pt.v[br.to_bus]);
    x[tl.w_lm_re] = wlm.real();
    x[tl.w_lm_im] = wlm.imag();
  }
  for (const Branch& br : net.branches) {
    auto [sf, st] = branch_flow(br, pt.v[br.from_bus], pt.v[br.to_bus],
                                br.is_tap() ? t[br.id] : 1.0);
    // flow definition rows are the first 4 Zero rows per branch
    int row = 4 * br.id;
    x[v.pf[br.id]] = sf.real();
    x[v.qf[br.id]] = sf.imag();
    x[v.pt[br.id]] = st.real();
    x[v.qt[br.id]] = st.imag();
    for (int r = 0; r < 4; ++r)
      CHECK(std::abs(built.program.eval_row(row + r, x)) <= 1e-12);
  }
}
