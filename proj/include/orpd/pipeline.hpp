//
//  pipeline.hpp
//
//  End-to-end orchestration: per (case, kind, objective) cell, build and
//  solve the relaxation, recover and round the discrete settings, solve
//  the continuous subproblem, and report bounds and optimality gaps.
//

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "orpd/acopf.hpp"
#include "orpd/recovery.hpp"
#include "orpd/relaxations.hpp"

namespace orpd {

enum class ChordalMode { Auto, On, Off };

struct RunConfig {
  std::vector<std::string> case_paths;
  std::vector<RelaxationModel> kinds = {RelaxationModel::SDR1,
                                        RelaxationModel::TCR1,
                                        RelaxationModel::SDR2,
                                        RelaxationModel::TCR2};
  std::vector<Objective> objectives = {Objective::Cost};
  ChordalMode chordal = ChordalMode::Auto;
  double tolerance = 1.49e-8;  // solver default precision used throughout
  double cell_time_limit = 600.0;
  int workers = 1;
  unsigned seed = 0;
  std::string out_path;        // empty writes to stdout
  std::string format = "json"; // json | csv | md
  bool tcr2_tap_box = false;

  bool valid() const { return !case_paths.empty() && !kinds.empty(); }
};

struct CellResult {
  RelaxationModel model{};
  Objective objective{};
  bool chordal = false;

  SolveStatus relax_status = SolveStatus::NumericalFailure;
  LocalStatus local_status = LocalStatus::Diverged;
  bool lower_ok = false;  // relaxation solved to a usable bound
  bool upper_ok = false;  // subproblem produced a feasible point

  double lower = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();
  double gap_percent = std::numeric_limits<double>::quiet_NaN();
  double normalized_lower = std::numeric_limits<double>::quiet_NaN();
  double normalized_upper = std::numeric_limits<double>::quiet_NaN();

  double build_time = 0, solve_time = 0, subproblem_time = 0;
  int relax_iterations = 0, local_iterations = 0;

  DiscreteAssignment assignment;
  std::vector<std::string> notes;
};

struct CaseReport {
  std::string name;
  std::string error;  // nonempty if the case could not be processed
  int buses = 0, branches = 0, shunts = 0, taps = 0;
  std::vector<CellResult> cells;
  // best bounds per objective over solved cells
  std::vector<std::pair<Objective, std::pair<double, double>>> best;
};

struct OrpdReport {
  RunConfig config;
  std::vector<CaseReport> cases;
  bool all_cells_ran = true;
};

OrpdReport run_pipeline(const RunConfig& config);

// json | csv | md (markdown tables mirror the result layout: normalized
// bounds to 4 decimals, bounds and gaps to 2)
std::string emit_report(const OrpdReport& report, const std::string& format);

// parses the bench config JSON into a RunConfig; throws on malformed input
RunConfig parse_config_json(const std::string& text);

}  // namespace orpd
