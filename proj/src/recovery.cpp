//
//  recovery.cpp
//

#include "orpd/recovery.hpp"

#include <cmath>

namespace orpd {

RelaxationSolution extract_solution(const Network& net,
                                    const BuiltRelaxation& built,
                                    const SolverResult& res) {
  RelaxationSolution sol;
  sol.kind = built.kind;
  sol.status = res.status;
  sol.bound = res.objective;
  sol.solve_time = res.solve_time;
  sol.iterations = res.iterations;
  if (!res.has_solution()) return sol;

  const LiftedVars& v = built.vars;
  const Eigen::VectorXd& x = res.x;
  for (int k = 0; k < net.bus_count(); ++k) sol.v_diag.push_back(x[v.v_diag[k]]);
  for (size_t i = 0; i < net.shunts.size(); ++i) sol.xi.push_back(x[v.xi[i]]);
  for (const auto& [l, t] : v.tap)
    sol.tap[l] = {x[t.w_ll], x[t.w_kl], x[t.w_lm_re], x[t.w_lm_im]};
  for (const Generator& g : net.generators) {
    sol.pg.push_back(x[v.pg[g.id]]);
    sol.qg.push_back(x[v.qg[g.id]]);
  }
  for (const Branch& br : net.branches) {
    sol.pf.push_back(x[v.pf[br.id]]);
    sol.qf.push_back(x[v.qf[br.id]]);
    sol.pt.push_back(x[v.pt[br.id]]);
    sol.qt.push_back(x[v.qt[br.id]]);
  }
  for (const auto& [key, handles] : v.v_off)
    sol.v_off[key] = {x[handles.first], x[handles.second]};
  for (auto [re, im] : v.v_rect) sol.v_rect.emplace_back(x[re], x[im]);
  return sol;
}

namespace {

double clamp_tracked(double val, double lo, double hi, const char* what,
                     int idx, std::vector<Diagnostic>& diags) {
  const double tol = 1e-6;
  if (val < lo - tol || val > hi + tol)
    throw RecoveredValueOutOfRange(std::string(what) + " at index " +
                                   std::to_string(idx) + " = " +
                                   std::to_string(val) + " outside [" +
                                   std::to_string(lo) + ", " +
                                   std::to_string(hi) + "]");
  if (val < lo || val > hi) {
    double clamped = std::min(hi, std::max(lo, val));
    diags.push_back({DiagSeverity::Warning, "RecoveryClamp",
                     std::string(what) + "[" + std::to_string(idx) +
                         "] clamped by " + std::to_string(std::abs(val - clamped))});
    return clamped;
  }
  return val;
}

}  // namespace

DiscreteAssignment recover_continuous(const Network& net,
                                      const RelaxationSolution& sol) {
  DiscreteAssignment out;
  for (size_t i = 0; i < net.shunts.size(); ++i) {
    int bus = net.shunts[i].bus;
    double vkk = sol.v_diag[bus];
    if (vkk <= 0) throw NonpositiveVkk(net.buses[bus].external_id);
    out.u_hat.push_back(clamp_tracked(sol.xi[i] / vkk, 0.0, 1.0, "u_hat",
                                      static_cast<int>(i), out.diags));
  }
  for (const auto& [l, w] : sol.tap) {
    const Branch& br = net.branches[l];
    double vkk = sol.v_diag[br.from_bus];
    double w_ll = w[0], w_kl = w[1];
    if (vkk <= 0) throw NonpositiveVkk(net.buses[br.from_bus].external_id);
    if (w_ll <= 0) throw NonpositiveWll(l);
    double t_sqrt = std::sqrt(vkk / w_ll);
    // the ratio route via W_kl exists too; report disagreement, use sqrt
    if (w_kl > 0) {
      double t_ratio = vkk / w_kl;
      if (std::abs(t_ratio - t_sqrt) > 1e-4)
        out.diags.push_back(
            {DiagSeverity::Warning, "TapRecoveryMismatch",
             "branch " + std::to_string(l) + ": sqrt route " +
                 std::to_string(t_sqrt) + " vs ratio route " +
                 std::to_string(t_ratio)});
    }
    out.t_hat[l] = clamp_tracked(t_sqrt, br.tap->t_min, br.tap->t_max, "t_hat",
                                 l, out.diags);
  }
  return out;
}

DiscreteAssignment round_assignment(const Network& net,
                                    DiscreteAssignment cont) {
  cont.u_round.clear();
  cont.t_round.clear();
  for (double u : cont.u_hat) cont.u_round.push_back(u >= 0.5 ? 1.0 : 0.0);
  for (const auto& [l, t] : cont.t_hat)
    cont.t_round[l] = tap_grid_round(*net.branches[l].tap, t);
  return cont;
}

double optimality_gap(double bound, double upper) {
  if (upper <= 0) throw NonpositiveUpper();
  return 100.0 * (1.0 - bound / upper);
}

}  // namespace orpd
