#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "orpd/pipeline.hpp"

using namespace orpd;
using nlohmann::json;

static std::string data_path(const std::string& f) {
  return std::string(ORPD_DATA_DIR) + "/" + f;
}

namespace {

void strip_volatile(json& j) {
  if (j.is_object()) {
    j.erase("volatile");
    for (auto& [k, v] : j.items()) strip_volatile(v);
  } else if (j.is_array()) {
    for (auto& v : j) strip_volatile(v);
  }
}

}  // namespace

TEST_CASE("pipeline on case14: four kinds, tight gaps, stable report") {
  RunConfig cfg;
  cfg.case_paths = {data_path("case14.m")};
  cfg.objectives = {Objective::Cost};
  OrpdReport report = run_pipeline(cfg);
  REQUIRE(report.cases.size() == 1);
  const CaseReport& cr = report.cases[0];
  CHECK(cr.error.empty());
  CHECK(cr.buses == 14);
  CHECK(cr.shunts == 1);
  CHECK(cr.taps == 3);
  REQUIRE(cr.cells.size() == 4);
  for (const CellResult& c : cr.cells) {
    REQUIRE(c.lower_ok);
    REQUIRE(c.upper_ok);
    CHECK(c.gap_percent <= 0.01);
    CHECK(c.gap_percent >= -1e-9);
    // every reported gap is recomputable from its own bounds
    CHECK(c.gap_percent ==
          doctest::Approx(100.0 * (1.0 - c.lower / c.upper)).epsilon(1e-12));
    CHECK(c.normalized_lower <= 1.0 + 1e-9);
    CHECK(c.normalized_upper >= 1.0 - 1e-9);
  }
  // cross-kind ordering within the run
  auto lower_of = [&](RelaxationModel m) {
    for (const CellResult& c : cr.cells)
      if (c.model == m) return c.lower;
    return 0.0;
  };
  double tol = 10 * cfg.tolerance * lower_of(RelaxationModel::SDR2);
  CHECK(lower_of(RelaxationModel::TCR1) <= lower_of(RelaxationModel::SDR1) + tol);
  CHECK(lower_of(RelaxationModel::TCR2) <= lower_of(RelaxationModel::SDR2) + tol);
  CHECK(lower_of(RelaxationModel::SDR1) <= lower_of(RelaxationModel::SDR2) + tol);
  CHECK(lower_of(RelaxationModel::TCR1) <= lower_of(RelaxationModel::TCR2) + tol);
}

TEST_CASE("determinism: identical configs give identical stable reports") {
  RunConfig cfg;
  cfg.case_paths = {data_path("case14.m")};
  cfg.kinds = {RelaxationModel::TCR2};
  cfg.objectives = {Objective::Cost};
  OrpdReport r1 = run_pipeline(cfg);
  OrpdReport r2 = run_pipeline(cfg);
  json j1 = json::parse(emit_report(r1, "json"));
  json j2 = json::parse(emit_report(r2, "json"));
  strip_volatile(j1);
  strip_volatile(j2);
  CHECK(j1.dump() == j2.dump());
}

TEST_CASE("parallel workers produce the same stable report as serial") {
  RunConfig cfg;
  cfg.case_paths = {data_path("case14.m")};
  cfg.kinds = {RelaxationModel::TCR1, RelaxationModel::TCR2};
  cfg.objectives = {Objective::Cost};
  OrpdReport serial = run_pipeline(cfg);
  cfg.workers = 2;
  OrpdReport parallel = run_pipeline(cfg);
  json a = json::parse(emit_report(serial, "json"));
  json b = json::parse(emit_report(parallel, "json"));
  strip_volatile(a);
  strip_volatile(b);
  CHECK(a.dump() == b.dump());
}

TEST_CASE("JSON report round-trips and carries the schema header") {
  RunConfig cfg;
  cfg.case_paths = {data_path("case30.m")};
  cfg.kinds = {RelaxationModel::TCR2};
  OrpdReport report = run_pipeline(cfg);
  std::string text = emit_report(report, "json");
  json j = json::parse(text);
  CHECK(j["schema"] == "orpd-report/1");
  CHECK(j["cases"].size() == 1);
  CHECK(j["cases"][0]["cells"].size() == 1);
  CHECK(j["cases"][0]["cells"][0].contains("volatile"));
  // numbers survive re-serialization exactly
  CHECK(json::parse(j.dump()).dump() == j.dump());
}

TEST_CASE("csv and md formats have the documented shape") {
  RunConfig cfg;
  cfg.case_paths = {data_path("case14.m")};
  cfg.kinds = {RelaxationModel::TCR2};
  OrpdReport report = run_pipeline(cfg);
  std::string csv = emit_report(report, "csv");
  CHECK(csv.rfind("case,kind,objective,chordal,status,local_status,lower,"
                  "upper,gap_percent,normalized_lower,normalized_upper,"
                  "solve_time,subproblem_time",
                  0) == 0);
  std::string md = emit_report(report, "md");
  CHECK(md.find("## Cost minimization") != std::string::npos);
  CHECK(md.find("| case14 |") != std::string::npos);
  // normalized values printed to 4 decimals
  CHECK(md.find("1.0000") != std::string::npos);
  CHECK_THROWS(emit_report(report, "yaml"));
}

TEST_CASE("unreadable case is reported per-case, batch continues") {
  RunConfig cfg;
  cfg.case_paths = {data_path("no_such_case.m"), data_path("case14.m")};
  cfg.kinds = {RelaxationModel::TCR2};
  OrpdReport report = run_pipeline(cfg);
  REQUIRE(report.cases.size() == 2);
  CHECK_FALSE(report.cases[0].error.empty());
  CHECK(report.cases[1].error.empty());
  CHECK_FALSE(report.all_cells_ran);
}

TEST_CASE("config JSON parsing") {
  std::string text = R"({
    "cases": ["a.m", "b.m"],
    "kinds": ["sdr2", "tcr1"],
    "objectives": ["loss"],
    "chordal": "on",
    "tol": 1e-7,
    "workers": 3,
    "format": "csv",
    "tcr2_tap_box": true
  })";
  RunConfig cfg = parse_config_json(text);
  CHECK(cfg.case_paths.size() == 2);
  REQUIRE(cfg.kinds.size() == 2);
  CHECK(cfg.kinds[0] == RelaxationModel::SDR2);
  CHECK(cfg.kinds[1] == RelaxationModel::TCR1);
  CHECK(cfg.objectives == std::vector<Objective>{Objective::Loss});
  CHECK(cfg.chordal == ChordalMode::On);
  CHECK(cfg.tolerance == doctest::Approx(1e-7));
  CHECK(cfg.workers == 3);
  CHECK(cfg.format == "csv");
  CHECK(cfg.tcr2_tap_box);
  CHECK_THROWS(parse_config_json(R"({"kinds": ["bogus"]})"));
}
