#include <sstream>

#include "doctest.h"
#include "orpd/case_io.hpp"

using namespace orpd;

static std::string data_path(const std::string& f) {
  return std::string(ORPD_DATA_DIR) + "/" + f;
}

TEST_CASE("case14 parses with expected dimensions") {
  RawCase c = parse_case_file(data_path("case14.m"));
  CHECK(c.name == "case14");
  CHECK(c.base_mva == 100.0);
  CHECK(c.bus_rows.size() == 14);
  CHECK(c.branch_rows.size() == 20);
  CHECK(c.gen_rows.size() == 5);
  CHECK(c.gencost_rows.size() == 5);
  // spot values
  CHECK(c.bus_rows[8][col::BS] == 19.0);
  CHECK(c.branch_rows[7][col::TAP] == doctest::Approx(0.978));
}

TEST_CASE("case30 parses with expected dimensions") {
  RawCase c = parse_case_file(data_path("case30.m"));
  CHECK(c.bus_rows.size() == 30);
  CHECK(c.branch_rows.size() == 41);
  CHECK(c.gen_rows.size() == 6);
}

TEST_CASE("missing matrix raises MissingMatrix") {
  std::string text = "mpc.baseMVA = 100;\nmpc.bus = [1 3 0 0 0 0 1 1 0 0 1 1.1 0.9;];\n";
  CHECK_THROWS_AS(parse_case_string(text), MissingMatrix);
}

TEST_CASE("non numeric entry is reported") {
  std::string text =
      "mpc.baseMVA = 100;\n"
      "mpc.bus = [1 3 0 0 0 0 1 1 0 0 1 1.1 0.9;];\n"
      "mpc.gen = [1 0 0 10 -10 1 100 1 bogus 0;];\n"
      "mpc.branch = [1 1 0 0.1 0 0 0 0 0 0 1 -360 360;];\n";
  CHECK_THROWS_AS(parse_case_string(text), NonNumericEntry);
}

TEST_CASE("comments, commas and continuations are tolerated") {
  std::string text =
      "% header comment\n"
      "mpc.baseMVA = 100; % trailing\n"
      "mpc.bus = [\n"
      " 1, 3, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1.1, 0.9;\n"
      " 2 1 10 5 0 0 1 ...\n"
      "   1 0 0 1 1.1 0.9; % split row\n"
      "];\n"
      "mpc.gen = [1 0 0 10 -10 1 100 1 50 0;];\n"
      "mpc.branch = [1 2 0.01 0.1 0 0 0 0 0 0 1 -360 360;];\n";
  RawCase c = parse_case_string(text);
  CHECK(c.bus_rows.size() == 2);
  CHECK(c.bus_rows[1][col::PD] == 10.0);
}

TEST_CASE("round trip preserves matrices to 12 significant digits") {
  RawCase c = parse_case_file(data_path("case14.m"));
  RawCase c2 = parse_case_string(write_case_string(c));
  REQUIRE(c2.bus_rows.size() == c.bus_rows.size());
  REQUIRE(c2.branch_rows.size() == c.branch_rows.size());
  for (size_t i = 0; i < c.bus_rows.size(); ++i)
    for (size_t j = 0; j < c.bus_rows[i].size(); ++j)
      CHECK(c2.bus_rows[i][j] == doctest::Approx(c.bus_rows[i][j]).epsilon(1e-12));
  for (size_t i = 0; i < c.branch_rows.size(); ++i)
    for (size_t j = 0; j < c.branch_rows[i].size(); ++j)
      CHECK(c2.branch_rows[i][j] ==
            doctest::Approx(c.branch_rows[i][j]).epsilon(1e-12));
  for (size_t i = 0; i < c.gencost_rows.size(); ++i)
    for (size_t j = 0; j < c.gencost_rows[i].size(); ++j)
      CHECK(c2.gencost_rows[i][j] ==
            doctest::Approx(c.gencost_rows[i][j]).epsilon(1e-12));
}

TEST_CASE("validate_case: pristine case14 is clean") {
  RawCase c = parse_case_file(data_path("case14.m"));
  auto diags = validate_case(c);
  CHECK(diags.empty());
}

TEST_CASE("validate_case: unknown branch endpoint") {
  RawCase c = parse_case_file(data_path("case14.m"));
  c.branch_rows[0][col::T_BUS] = 99;
  auto diags = validate_case(c);
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].code == "UnknownBus");
  CHECK(diags[0].severity == DiagSeverity::Error);
}

TEST_CASE("validate_case: inverted voltage bound") {
  RawCase c = parse_case_file(data_path("case14.m"));
  c.bus_rows[3][col::VMAX] = 0.9;
  c.bus_rows[3][col::VMIN] = 1.1;
  auto diags = validate_case(c);
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].code == "InvertedBound");
}

TEST_CASE("validate_case: duplicate bus id, pwl cost, status flags") {
  RawCase c = parse_case_file(data_path("case14.m"));
  c.bus_rows[1][col::BUS_I] = 1;
  c.gencost_rows[0][col::COST_MODEL] = 1;  // piecewise linear
  c.gen_rows[2][col::GEN_STATUS] = 0;
  c.branch_rows[5][col::BR_STATUS] = 0;
  auto diags = validate_case(c);
  bool dup = false, pwl = false, gen_off = false, br_off = false;
  for (const auto& d : diags) {
    dup |= d.code == "DuplicateBusId";
    pwl |= d.code == "UnsupportedCostModel";
    gen_off |= d.code == "OutOfServiceGen";
    br_off |= d.code == "OutOfServiceBranch";
  }
  CHECK(dup);
  CHECK(pwl);
  CHECK(gen_off);
  CHECK(br_off);
  CHECK(has_errors(diags));
}
