//
//  orpd.cpp — command line front end
//
//  orpd solve --case <file> [--kind sdr1|tcr1|sdr2|tcr2|all] [--objective
//       cost|loss|both] [--chordal|--full-psd] [--tol x] [--out path]
//       [--format json|csv|md] [--workers n] [--time-limit s]
//  orpd bench --config <json>
//  orpd validate --case <file>
//

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "orpd/case_io.hpp"
#include "orpd/pipeline.hpp"

using namespace orpd;

namespace {

int write_out(const OrpdReport& report, const RunConfig& cfg) {
  std::string text = emit_report(report, cfg.format);
  if (cfg.out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(cfg.out_path);
    if (!f) {
      std::cerr << "cannot write " << cfg.out_path << "\n";
      return 2;
    }
    f << text;
  }
  // per-cell failures are recorded in the report; a case that could not
  // run at all is a partial batch
  return report.all_cells_ran ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conic relaxations and round-off for reactive power dispatch"};
  app.require_subcommand(1);

  // ---- solve ----
  auto* solve_cmd = app.add_subcommand("solve", "run one case end to end");
  std::string case_path, kind = "all", objective = "cost", format = "json",
              out_path;
  double tol = 1.49e-8, time_limit = 600;
  int workers = 1;
  bool chordal_on = false, full_psd = false;
  solve_cmd->add_option("--case", case_path, "MATPOWER case file")->required();
  solve_cmd->add_option("--kind", kind, "sdr1|tcr1|sdr2|tcr2|all");
  solve_cmd->add_option("--objective", objective, "cost|loss|both");
  solve_cmd->add_flag("--chordal", chordal_on, "decompose the PSD constraint");
  solve_cmd->add_flag("--full-psd", full_psd, "force the undecomposed PSD form");
  solve_cmd->add_option("--tol", tol, "solver tolerance");
  solve_cmd->add_option("--time-limit", time_limit, "per-cell limit [s]");
  solve_cmd->add_option("--workers", workers, "concurrent cells");
  solve_cmd->add_option("--out", out_path, "output file (default stdout)");
  solve_cmd->add_option("--format", format, "json|csv|md");

  // ---- bench ----
  auto* bench_cmd = app.add_subcommand("bench", "run a batch from a config");
  std::string config_path;
  bench_cmd->add_option("--config", config_path, "JSON config")->required();

  // ---- validate ----
  auto* val_cmd = app.add_subcommand("validate", "parse and check a case");
  std::string val_case;
  val_cmd->add_option("--case", val_case, "MATPOWER case file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(solve_cmd)) {
      RunConfig cfg;
      cfg.case_paths = {case_path};
      cfg.kinds.clear();
      auto add_kind = [&](const std::string& s) {
        if (s == "sdr1") cfg.kinds.push_back(RelaxationModel::SDR1);
        else if (s == "tcr1") cfg.kinds.push_back(RelaxationModel::TCR1);
        else if (s == "sdr2") cfg.kinds.push_back(RelaxationModel::SDR2);
        else if (s == "tcr2") cfg.kinds.push_back(RelaxationModel::TCR2);
        else throw std::invalid_argument("unknown kind: " + s);
      };
      if (kind == "all") {
        for (const char* k : {"sdr1", "tcr1", "sdr2", "tcr2"}) add_kind(k);
      } else {
        add_kind(kind);
      }
      cfg.objectives.clear();
      if (objective == "both") {
        cfg.objectives = {Objective::Cost, Objective::Loss};
      } else if (objective == "cost") {
        cfg.objectives = {Objective::Cost};
      } else if (objective == "loss") {
        cfg.objectives = {Objective::Loss};
      } else {
        throw std::invalid_argument("unknown objective: " + objective);
      }
      cfg.chordal = chordal_on ? ChordalMode::On
                    : full_psd ? ChordalMode::Off
                               : ChordalMode::Auto;
      cfg.tolerance = tol;
      cfg.cell_time_limit = time_limit;
      cfg.workers = workers;
      cfg.out_path = out_path;
      cfg.format = format;
      if (!cfg.valid()) return 2;
      return write_out(run_pipeline(cfg), cfg);
    }

    if (app.got_subcommand(bench_cmd)) {
      std::ifstream f(config_path);
      if (!f) {
        std::cerr << "cannot read config " << config_path << "\n";
        return 2;
      }
      std::string text((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());
      RunConfig cfg = parse_config_json(text);
      if (!cfg.valid()) {
        std::cerr << "config needs at least one case and one kind\n";
        return 2;
      }
      return write_out(run_pipeline(cfg), cfg);
    }

    if (app.got_subcommand(val_cmd)) {
      RawCase raw = parse_case_file(val_case);
      auto diags = validate_case(raw);
      for (const auto& d : diags)
        std::cout << (d.severity == DiagSeverity::Error ? "error" : "warning")
                  << " [" << d.code << "] " << d.message << "\n";
      std::cout << raw.name << ": " << raw.bus_rows.size() << " buses, "
                << raw.branch_rows.size() << " branches, "
                << raw.gen_rows.size() << " generators\n";
      return has_errors(diags) ? 1 : 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
