#include <complex>
#include <random>
#include <tuple>

#include "doctest.h"
#include "orpd/case_io.hpp"
#include "orpd/network.hpp"

using namespace orpd;
using cx = std::complex<double>;

static std::string data_path(const std::string& f) {
  return std::string(ORPD_DATA_DIR) + "/" + f;
}

static Network load(const std::string& f) {
  return build_network(parse_case_file(data_path(f)));
}

TEST_CASE("case14: |U|=1, |T|=3") {
  Network net = load("case14.m");
  CHECK(net.buses.size() == 14);
  CHECK(net.branches.size() == 20);
  CHECK(net.shunts.size() == 1);
  CHECK(net.tap_branches.size() == 3);
  CHECK(net.reference_bus == 0);
  // shunt at bus 9 (external): 19 MVAr on 100 MVA base
  CHECK(net.buses[net.shunts[0].bus].external_id == 9);
  CHECK(net.shunts[0].b_shunt == doctest::Approx(0.19));
  // cost rescale: c2' = c2*base^2, c1' = c1*base
  CHECK(net.generators[0].cost_c2 == doctest::Approx(0.0430292599 * 1e4));
  CHECK(net.generators[0].cost_c1 == doctest::Approx(20.0 * 100));
}

TEST_CASE("case57: |U|=3, |T|=17") {
  Network net = load("case57.m");
  CHECK(net.buses.size() == 57);
  CHECK(net.branches.size() == 80);
  CHECK(net.shunts.size() == 3);
  CHECK(net.tap_branches.size() == 17);
}

TEST_CASE("case30: |U|=2, |T|=0; case_ieee30: |U|=2, |T|=4") {
  Network n30 = load("case30.m");
  CHECK(n30.shunts.size() == 2);
  CHECK(n30.tap_branches.empty());
  Network ni30 = load("case_ieee30.m");
  CHECK(ni30.shunts.size() == 2);
  CHECK(ni30.tap_branches.size() == 4);
}

TEST_CASE("zero impedance branch is rejected") {
  RawCase c = parse_case_file(data_path("case14.m"));
  c.branch_rows[0][col::BR_R] = 0;
  c.branch_rows[0][col::BR_X] = 0;
  CHECK_THROWS_AS(build_network(c), ZeroImpedanceBranch);
}

TEST_CASE("nonzero phase shift is rejected") {
  RawCase c = parse_case_file(data_path("case14.m"));
  c.branch_rows[7][col::SHIFT] = 10.0;
  CHECK_THROWS_AS(build_network(c), UnsupportedPhaseShift);
}

TEST_CASE("reference bus multiplicity") {
  RawCase c = parse_case_file(data_path("case14.m"));
  c.bus_rows[1][col::BUS_TYPE] = 3;
  CHECK_THROWS_AS(build_network(c), MultipleReferenceBuses);
  c.bus_rows[0][col::BUS_TYPE] = 1;
  c.bus_rows[1][col::BUS_TYPE] = 1;
  CHECK_THROWS_AS(build_network(c), NoReferenceBus);
}

TEST_CASE("disconnected network is rejected") {
  RawCase c = parse_case_file(data_path("case14.m"));
  // cut bus 8 loose (its only branch is 7-8)
  c.branch_rows[13][col::BR_STATUS] = 0;
  CHECK_THROWS_AS(build_network(c), DisconnectedNetwork);
}

TEST_CASE("default tap grid: 17 values including 1.0") {
  TapGrid g = TapGrid::default_grid();
  REQUIRE(g.values.size() == 17);
  CHECK(g.values.front() == doctest::Approx(0.9));
  CHECK(g.values.back() == doctest::Approx(1.1));
  CHECK(g.values[8] == doctest::Approx(1.0));
}

TEST_CASE("tap_grid_round") {
  TapGrid g = TapGrid::default_grid();
  CHECK(tap_grid_round(g, 1.006) == doctest::Approx(1.0));
  CHECK(tap_grid_round(g, 1.00625) == doctest::Approx(1.0125));  // tie up
  CHECK(tap_grid_round(g, 0.85) == doctest::Approx(0.9));        // clamp
  CHECK(tap_grid_round(g, 2.0) == doctest::Approx(1.1));
  // idempotent on grid values
  for (double v : g.values) CHECK(tap_grid_round(g, v) == doctest::Approx(v));
}

TEST_CASE("branch_flow trivial cases") {
  Branch br;
  br.series_admittance = cx(1.0, -2.0);
  br.shunt_susceptance_total = 0.0;
  auto [sf, st] = branch_flow(br, cx(1, 0), cx(1, 0), 1.0);
  CHECK(std::abs(sf) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(std::abs(st) == doctest::Approx(0.0).epsilon(1e-14));

  br.shunt_susceptance_total = 0.2;
  std::tie(sf, st) = branch_flow(br, cx(1, 0), cx(1, 0), 1.0);
  CHECK(sf.real() == doctest::Approx(0.0));
  CHECK(sf.imag() == doctest::Approx(-0.1));
  CHECK(st.imag() == doctest::Approx(-0.1));
}

TEST_CASE("branch_flow cross-checked against independent complex arithmetic") {
  Branch br;
  br.series_admittance = cx(1.0, -2.0);
  br.shunt_susceptance_total = 0.0;
  double t = 1.0125;
  cx vf = cx(1.02, 0.0);
  cx vt = std::polar(1.0, -0.05);
  auto [sf, st] = branch_flow(br, vf, vt, t);
  // independent route: series current, then S = V conj(I) at each end
  cx y(1.0, -2.0);
  cx w = vf / t;
  cx i_from = y * (w - vt);
  cx s_from_ref = w * std::conj(i_from);
  cx i_to = y * (vt - w);
  cx s_to_ref = vt * std::conj(i_to);
  CHECK(sf.real() == doctest::Approx(s_from_ref.real()).epsilon(1e-12));
  CHECK(sf.imag() == doctest::Approx(s_from_ref.imag()).epsilon(1e-12));
  CHECK(st.real() == doctest::Approx(s_to_ref.real()).epsilon(1e-12));
  CHECK(st.imag() == doctest::Approx(s_to_ref.imag()).epsilon(1e-12));
}

TEST_CASE("resistive branch dissipates on random voltages") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> mag(0.9, 1.1), ang(-0.6, 0.6),
      res(0.01, 0.3), rea(0.01, 0.5);
  for (int trial = 0; trial < 200; ++trial) {
    Branch br;
    br.series_admittance = 1.0 / cx(res(rng), rea(rng));
    br.shunt_susceptance_total = 0.0;
    cx vf = std::polar(mag(rng), ang(rng));
    cx vt = std::polar(mag(rng), ang(rng));
    auto [sf, st] = branch_flow(br, vf, vt, 1.0);
    CHECK(sf.real() + st.real() >= -1e-12);
  }
}

TEST_CASE("build_network is deterministic") {
  Network a = load("case57.m");
  Network b = load("case57.m");
  CHECK(a.to_json() == b.to_json());
}
