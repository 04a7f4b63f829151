//
//  pipeline.cpp
//

#include "orpd/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "orpd/case_io.hpp"

namespace orpd {

namespace {

using nlohmann::json;

double now_between(std::chrono::steady_clock::time_point a,
                   std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

bool use_chordal(const RunConfig& cfg, RelaxationModel m, int buses) {
  if (m == RelaxationModel::TCR1 || m == RelaxationModel::TCR2) return false;
  switch (cfg.chordal) {
    case ChordalMode::On: return true;
    case ChordalMode::Off: return false;
    case ChordalMode::Auto: return buses > 40;
  }
  return false;
}

CellResult run_cell(const Network& net, const RunConfig& cfg,
                    RelaxationModel model, Objective objective) {
  CellResult cell;
  cell.model = model;
  cell.objective = objective;
  cell.chordal = use_chordal(cfg, model, net.bus_count());

  RelaxationKind kind{model, objective, cell.chordal, cfg.tcr2_tap_box};
  auto t0 = std::chrono::steady_clock::now();
  BuiltRelaxation built = build_relaxation(net, kind);
  auto t1 = std::chrono::steady_clock::now();
  cell.build_time = now_between(t0, t1);

  SolveOptions sopts;
  sopts.tolerance = cfg.tolerance;
  sopts.time_limit_seconds = cfg.cell_time_limit;
  SolverResult sres = solve(built.program, sopts);
  cell.relax_status = sres.status;
  cell.solve_time = sres.solve_time;
  cell.relax_iterations = sres.iterations;

  RelaxationSolution sol = extract_solution(net, built, sres);
  if (!sol.usable()) {
    cell.notes.push_back("relaxation failed: " +
                         std::string(to_string(sres.status)) +
                         (sres.message.empty() ? "" : " (" + sres.message + ")"));
    return cell;
  }
  if (sres.status == SolveStatus::IterLimit)
    cell.notes.push_back("relaxation bound is approximate: " + sres.message);
  cell.lower = sol.bound;
  cell.lower_ok = true;

  try {
    DiscreteAssignment asg = round_assignment(net, recover_continuous(net, sol));
    for (const Diagnostic& d : asg.diags)
      cell.notes.push_back(d.code + ": " + d.message);

    auto t2 = std::chrono::steady_clock::now();
    LocalSolveOptions lopts;
    lopts.objective = objective;
    lopts.time_limit_seconds = cfg.cell_time_limit;
    OperatingPoint warm = warm_start_from(net, sol);
    LocalSolveResult local = solve_subproblem(net, asg, warm, lopts);
    auto t3 = std::chrono::steady_clock::now();
    cell.subproblem_time = now_between(t2, t3);
    cell.local_status = local.status;
    cell.local_iterations = local.iterations;
    cell.assignment = std::move(asg);
    if (local.feasible()) {
      // re-verify feasibility outside the solver
      double recheck =
          residual_norm(net, cell.assignment, local.point);
      if (recheck > 1e-6) {
        cell.notes.push_back("subproblem point failed the residual recheck: " +
                             std::to_string(recheck));
      } else {
        cell.upper = local.objective;
        cell.upper_ok = true;
        cell.gap_percent = optimality_gap(cell.lower, cell.upper);
      }
    } else {
      cell.notes.push_back("subproblem failed: " +
                           std::string(to_string(local.status)));
    }
  } catch (const std::exception& e) {
    cell.notes.push_back(std::string("recovery failed: ") + e.what());
  }
  return cell;
}

json cell_to_json(const CellResult& c) {
  json j;
  j["kind"] = to_string(c.model);
  j["objective"] = to_string(c.objective);
  j["chordal"] = c.chordal;
  j["status"] = to_string(c.relax_status);
  j["local_status"] = to_string(c.local_status);
  if (c.lower_ok) {
    j["lower"] = c.lower;
    j["normalized_lower"] = c.normalized_lower;
  }
  if (c.upper_ok) {
    j["upper"] = c.upper;
    j["gap_percent"] = c.gap_percent;
    j["normalized_upper"] = c.normalized_upper;
  }
  if (!c.assignment.u_round.empty() || !c.assignment.t_round.empty()) {
    json a;
    a["u"] = c.assignment.u_round;
    a["u_hat"] = c.assignment.u_hat;
    json tr = json::object(), th = json::object();
    for (auto [l, t] : c.assignment.t_round) tr[std::to_string(l)] = t;
    for (auto [l, t] : c.assignment.t_hat) th[std::to_string(l)] = t;
    a["t"] = tr;
    a["t_hat"] = th;
    j["assignment"] = a;
  }
  if (!c.notes.empty()) j["notes"] = c.notes;
  j["volatile"] = {{"build_time", c.build_time},
                   {"solve_time", c.solve_time},
                   {"subproblem_time", c.subproblem_time},
                   {"relax_iterations", c.relax_iterations},
                   {"local_iterations", c.local_iterations}};
  return j;
}

std::string fmt(double v, int decimals) {
  if (std::isnan(v)) return "--";
  char buf[64];
  snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

}  // namespace

OrpdReport run_pipeline(const RunConfig& config) {
  OrpdReport report;
  report.config = config;

  for (const std::string& path : config.case_paths) {
    CaseReport cr;
    cr.name = path;
    Network net;
    try {
      RawCase raw = parse_case_file(path);
      cr.name = raw.name;
      auto diags = validate_case(raw);
      if (has_errors(diags)) {
        std::string msg = "validation failed:";
        for (const auto& d : diags)
          if (d.severity == DiagSeverity::Error) msg += " [" + d.code + "]";
        cr.error = msg;
        report.cases.push_back(std::move(cr));
        report.all_cells_ran = false;
        continue;
      }
      net = build_network(raw);
    } catch (const std::exception& e) {
      cr.error = e.what();
      report.cases.push_back(std::move(cr));
      report.all_cells_ran = false;
      continue;
    }
    cr.buses = net.bus_count();
    cr.branches = static_cast<int>(net.branches.size());
    cr.shunts = static_cast<int>(net.shunts.size());
    cr.taps = static_cast<int>(net.tap_branches.size());

    struct Task {
      RelaxationModel model;
      Objective objective;
    };
    std::vector<Task> tasks;
    for (Objective obj : config.objectives)
      for (RelaxationModel m : config.kinds) tasks.push_back({m, obj});
    cr.cells.resize(tasks.size());

    if (config.workers > 1) {
      std::mutex mtx;
      size_t next = 0;
      auto worker = [&] {
        for (;;) {
          size_t i;
          {
            std::lock_guard<std::mutex> lock(mtx);
            if (next >= tasks.size()) return;
            i = next++;
          }
          cr.cells[i] =
              run_cell(net, config, tasks[i].model, tasks[i].objective);
        }
      };
      std::vector<std::thread> pool;
      int nthreads = std::min<int>(config.workers, static_cast<int>(tasks.size()));
      pool.reserve(nthreads);
      for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    } else {
      for (size_t i = 0; i < tasks.size(); ++i)
        cr.cells[i] = run_cell(net, config, tasks[i].model, tasks[i].objective);
    }

    // best bounds per objective across solved kinds
    for (Objective obj : config.objectives) {
      double best_lower = -std::numeric_limits<double>::infinity();
      double best_upper = std::numeric_limits<double>::infinity();
      for (const CellResult& c : cr.cells) {
        if (c.objective != obj) continue;
        if (c.lower_ok) best_lower = std::max(best_lower, c.lower);
        if (c.upper_ok) best_upper = std::min(best_upper, c.upper);
      }
      for (CellResult& c : cr.cells) {
        if (c.objective != obj) continue;
        if (c.lower_ok && std::isfinite(best_lower))
          c.normalized_lower = c.lower / best_lower;
        if (c.upper_ok && std::isfinite(best_upper))
          c.normalized_upper = c.upper / best_upper;
      }
      cr.best.push_back({obj, {best_lower, best_upper}});
    }
    report.cases.push_back(std::move(cr));
  }
  return report;
}

std::string emit_report(const OrpdReport& report, const std::string& format) {
  if (format == "json") {
    json j;
    j["schema"] = "orpd-report/1";
    json cfg;
    {
      std::vector<std::string> kinds, objectives;
      for (auto m : report.config.kinds) kinds.push_back(to_string(m));
      for (auto o : report.config.objectives) objectives.push_back(to_string(o));
      cfg["kinds"] = kinds;
      cfg["objectives"] = objectives;
      cfg["tolerance"] = report.config.tolerance;
      cfg["chordal"] = report.config.chordal == ChordalMode::Auto ? "auto"
                       : report.config.chordal == ChordalMode::On ? "on"
                                                                  : "off";
      cfg["seed"] = report.config.seed;
      cfg["tcr2_tap_box"] = report.config.tcr2_tap_box;
      cfg["averages_skip_failed_cells"] = true;
    }
    j["config"] = cfg;
    j["cases"] = json::array();
    for (const CaseReport& cr : report.cases) {
      json cj;
      cj["name"] = cr.name;
      if (!cr.error.empty()) {
        cj["error"] = cr.error;
        j["cases"].push_back(cj);
        continue;
      }
      cj["buses"] = cr.buses;
      cj["branches"] = cr.branches;
      cj["shunts"] = cr.shunts;
      cj["taps"] = cr.taps;
      json best = json::object();
      for (const auto& [obj, lu] : cr.best) {
        json b;
        if (std::isfinite(lu.first)) b["lower"] = lu.first;
        if (std::isfinite(lu.second)) b["upper"] = lu.second;
        best[to_string(obj)] = b;
      }
      cj["best"] = best;
      cj["cells"] = json::array();
      for (const CellResult& c : cr.cells) cj["cells"].push_back(cell_to_json(c));
      j["cases"].push_back(cj);
    }
    return j.dump(2) + "\n";
  }

  if (format == "csv") {
    std::ostringstream ss;
    ss << "case,kind,objective,chordal,status,local_status,lower,upper,"
          "gap_percent,normalized_lower,normalized_upper,solve_time,"
          "subproblem_time\n";
    for (const CaseReport& cr : report.cases) {
      for (const CellResult& c : cr.cells) {
        ss << cr.name << ',' << to_string(c.model) << ','
           << to_string(c.objective) << ',' << (c.chordal ? 1 : 0) << ','
           << to_string(c.relax_status) << ',' << to_string(c.local_status)
           << ',' << fmt(c.lower, 2) << ',' << fmt(c.upper, 2) << ','
           << fmt(c.gap_percent, 2) << ',' << fmt(c.normalized_lower, 4) << ','
           << fmt(c.normalized_upper, 4) << ',' << fmt(c.solve_time, 2) << ','
           << fmt(c.subproblem_time, 2) << "\n";
      }
    }
    return ss.str();
  }

  if (format == "md") {
    std::ostringstream ss;
    for (Objective obj : report.config.objectives) {
      ss << "## " << (obj == Objective::Cost ? "Cost minimization"
                                             : "Loss minimization")
         << "\n\n";
      ss << "| case | best lower | best upper |";
      for (auto m : report.config.kinds) ss << " norm " << to_string(m) << " |";
      for (auto m : report.config.kinds)
        ss << " gap " << to_string(m) << " [%] |";
      ss << "\n|---|---|---|";
      for (size_t i = 0; i < 2 * report.config.kinds.size(); ++i) ss << "---|";
      ss << "\n";
      for (const CaseReport& cr : report.cases) {
        if (!cr.error.empty()) {
          ss << "| " << cr.name << " | error | | \n";
          continue;
        }
        double bl = NAN, bu = NAN;
        for (const auto& [o, lu] : cr.best)
          if (o == obj) {
            bl = std::isfinite(lu.first) ? lu.first : NAN;
            bu = std::isfinite(lu.second) ? lu.second : NAN;
          }
        ss << "| " << cr.name << " | " << fmt(bl, 2) << " | " << fmt(bu, 2)
           << " |";
        for (auto m : report.config.kinds) {
          double v = NAN;
          for (const CellResult& c : cr.cells)
            if (c.model == m && c.objective == obj) v = c.normalized_lower;
          ss << " " << fmt(v, 4) << " |";
        }
        for (auto m : report.config.kinds) {
          double v = NAN;
          for (const CellResult& c : cr.cells)
            if (c.model == m && c.objective == obj) v = c.gap_percent;
          ss << " " << fmt(v, 2) << " |";
        }
        ss << "\n";
      }
      // averages over the cells that produced values (failed cells skipped)
      ss << "| average |  |  |";
      for (auto m : report.config.kinds) {
        double sum = 0;
        int cnt = 0;
        for (const CaseReport& cr : report.cases)
          for (const CellResult& c : cr.cells)
            if (c.model == m && c.objective == obj &&
                std::isfinite(c.normalized_lower)) {
              sum += c.normalized_lower;
              ++cnt;
            }
        ss << " " << fmt(cnt ? sum / cnt : NAN, 4) << " |";
      }
      for (auto m : report.config.kinds) {
        double sum = 0;
        int cnt = 0;
        for (const CaseReport& cr : report.cases)
          for (const CellResult& c : cr.cells)
            if (c.model == m && c.objective == obj &&
                std::isfinite(c.gap_percent)) {
              sum += c.gap_percent;
              ++cnt;
            }
        ss << " " << fmt(cnt ? sum / cnt : NAN, 2) << " |";
      }
      ss << "\n\n";
    }
    return ss.str();
  }
  throw std::invalid_argument("unknown report format: " + format);
}

RunConfig parse_config_json(const std::string& text) {
  json j = json::parse(text);
  RunConfig cfg;
  if (j.contains("cases"))
    cfg.case_paths = j["cases"].get<std::vector<std::string>>();
  if (j.contains("kinds")) {
    cfg.kinds.clear();
    for (const auto& k : j["kinds"]) {
      std::string s = k.get<std::string>();
      for (auto& ch : s) ch = static_cast<char>(tolower(ch));
      if (s == "sdr1") cfg.kinds.push_back(RelaxationModel::SDR1);
      else if (s == "tcr1") cfg.kinds.push_back(RelaxationModel::TCR1);
      else if (s == "sdr2") cfg.kinds.push_back(RelaxationModel::SDR2);
      else if (s == "tcr2") cfg.kinds.push_back(RelaxationModel::TCR2);
      else throw std::invalid_argument("unknown kind: " + s);
    }
  }
  if (j.contains("objectives")) {
    cfg.objectives.clear();
    for (const auto& o : j["objectives"]) {
      std::string s = o.get<std::string>();
      if (s == "cost") cfg.objectives.push_back(Objective::Cost);
      else if (s == "loss") cfg.objectives.push_back(Objective::Loss);
      else throw std::invalid_argument("unknown objective: " + s);
    }
  }
  if (j.contains("chordal")) {
    if (j["chordal"].is_boolean())
      cfg.chordal = j["chordal"].get<bool>() ? ChordalMode::On : ChordalMode::Off;
    else {
      std::string s = j["chordal"].get<std::string>();
      cfg.chordal = s == "on" ? ChordalMode::On
                    : s == "off" ? ChordalMode::Off
                                 : ChordalMode::Auto;
    }
  }
  if (j.contains("tol")) cfg.tolerance = j["tol"].get<double>();
  if (j.contains("time_limit")) cfg.cell_time_limit = j["time_limit"].get<double>();
  if (j.contains("workers")) cfg.workers = j["workers"].get<int>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<unsigned>();
  if (j.contains("out")) cfg.out_path = j["out"].get<std::string>();
  if (j.contains("format")) cfg.format = j["format"].get<std::string>();
  if (j.contains("tcr2_tap_box")) cfg.tcr2_tap_box = j["tcr2_tap_box"].get<bool>();
  return cfg;
}

}  // namespace orpd
