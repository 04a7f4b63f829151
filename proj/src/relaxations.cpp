//
//  relaxations.cpp
//

#include "orpd/relaxations.hpp"

#include <algorithm>
#include <set>

#include "orpd/acopf.hpp"
#include "orpd/recovery.hpp"

namespace orpd {

const char* to_string(RelaxationModel m) {
  switch (m) {
    case RelaxationModel::SDR1: return "SDR1";
    case RelaxationModel::TCR1: return "TCR1";
    case RelaxationModel::SDR2: return "SDR2";
    case RelaxationModel::TCR2: return "TCR2";
  }
  return "?";
}

const char* to_string(Objective o) {
  return o == Objective::Cost ? "cost" : "loss";
}

bool LiftedVars::has_v_off(int k, int m) const {
  if (k > m) std::swap(k, m);
  return v_off.count({k, m}) > 0;
}

ComplexExpr LiftedVars::V_entry(int k, int m) const {
  if (k == m) return ComplexExpr::real_var(v_diag[k]);
  bool conjugate = k > m;
  if (conjugate) std::swap(k, m);
  auto it = v_off.find({k, m});
  if (it == v_off.end())
    throw std::logic_error("V entry not instantiated: (" + std::to_string(k) +
                           "," + std::to_string(m) + ")");
  ComplexExpr e{LinExpr::variable(it->second.first),
                LinExpr::variable(it->second.second)};
  return conjugate ? e.conj() : e;
}

void tap_envelope_rows(ConeProgram& prog, const RelaxationKind& kind,
                       double t_min, double t_max, const LinExpr& v_kk,
                       const LinExpr& w_kl, const LinExpr& w_ll) {
  if (t_min > t_max) throw DegenerateTapRange();
  if (t_min == t_max) {
    // fixed ratio: W_kl = V_kk / t, W_ll = V_kk / t^2
    prog.add_equality(t_min * w_kl - v_kk);
    prog.add_equality(t_min * t_min * w_ll - v_kk);
    return;
  }
  const bool hull = kind.hull_tap();
  const bool tcr1 = kind.model == RelaxationModel::TCR1;
  if (hull) {
    // V_kk + t_min t_max W_ll <= (t_min + t_max) W_kl
    prog.add_nonneg((t_min + t_max) * w_kl - v_kk - (t_min * t_max) * w_ll);
    if (!(kind.model == RelaxationModel::TCR2 && kind.tcr2_tap_box)) return;
  }
  if (tcr1 || (kind.model == RelaxationModel::TCR2 && kind.tcr2_tap_box)) {
    // two-sided bounds on both lifted ratios
    prog.add_nonneg(w_kl - (1.0 / t_max) * v_kk);
    prog.add_nonneg((1.0 / t_min) * v_kk - w_kl);
    prog.add_nonneg(w_ll - (1.0 / (t_max * t_max)) * v_kk);
    prog.add_nonneg((1.0 / (t_min * t_min)) * v_kk - w_ll);
  } else if (!hull) {
    // SDR1: one-sided bounds; the PSD block supplies W_kl^2 <= V_kk W_ll
    prog.add_nonneg(w_kl - (1.0 / t_max) * v_kk);
    prog.add_nonneg((1.0 / (t_min * t_min)) * v_kk - w_ll);
  }
}

namespace {

// from-side admittance coefficient (-j b'/2 + y*) used by the lifted flows
std::complex<double> shunted_conj(const Branch& br) {
  return std::conj(br.series_admittance) +
         std::complex<double>(0.0, -br.shunt_susceptance_total / 2.0);
}

struct Builder {
  const Network& net;
  RelaxationKind kind;
  BuiltRelaxation out;

  ConeProgram& prog() { return out.program; }
  LiftedVars& V() { return out.vars; }

  std::set<std::pair<int, int>> needed_pairs() const {
    std::set<std::pair<int, int>> pairs;
    auto key = [](int a, int b) {
      return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    };
    for (const Branch& br : net.branches) pairs.insert(key(br.from_bus, br.to_bus));
    return pairs;
  }

  void make_variables(const CliqueCover& cover) {
    auto& v = V();
    const int n = net.bus_count();
    for (int k = 0; k < n; ++k)
      v.v_diag.push_back(
          prog().add_variable("V[" + std::to_string(net.buses[k].external_id) + "]"));

    std::set<std::pair<int, int>> pairs;
    if (kind.is_sdr() && !kind.chordal) {
      for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) pairs.insert({a, b});
    } else if (kind.is_sdr()) {
      for (const auto& c : cover.cliques)
        for (size_t i = 0; i < c.size(); ++i)
          for (size_t j = i + 1; j < c.size(); ++j)
            pairs.insert({c[j] < c[i] ? c[j] : c[i], c[j] < c[i] ? c[i] : c[j]});
    } else {
      pairs = needed_pairs();
    }
    for (auto [a, b] : pairs) {
      std::string tag = std::to_string(net.buses[a].external_id) + "," +
                        std::to_string(net.buses[b].external_id);
      int re = prog().add_variable("V.re[" + tag + "]");
      int im = prog().add_variable("V.im[" + tag + "]");
      v.v_off[{a, b}] = {re, im};
    }

    for (int l : net.tap_branches) {
      std::string tag = std::to_string(l);
      TapLift t;
      t.w_ll = prog().add_variable("Wll[" + tag + "]");
      t.w_kl = prog().add_variable("Wkl[" + tag + "]");
      t.w_lm_re = prog().add_variable("Wlm.re[" + tag + "]");
      t.w_lm_im = prog().add_variable("Wlm.im[" + tag + "]");
      v.tap[l] = t;
    }

    for (size_t i = 0; i < net.shunts.size(); ++i)
      v.xi.push_back(prog().add_variable(
          "xi[" + std::to_string(net.buses[net.shunts[i].bus].external_id) + "]"));

    for (const Generator& g : net.generators) {
      v.pg.push_back(prog().add_variable("pg[" + std::to_string(g.id) + "]"));
      v.qg.push_back(prog().add_variable("qg[" + std::to_string(g.id) + "]"));
    }
    for (const Branch& br : net.branches) {
      std::string tag = std::to_string(br.id);
      v.pf.push_back(prog().add_variable("pf[" + tag + "]"));
      v.qf.push_back(prog().add_variable("qf[" + tag + "]"));
      v.pt.push_back(prog().add_variable("pt[" + tag + "]"));
      v.qt.push_back(prog().add_variable("qt[" + tag + "]"));
    }
    if (!kind.is_sdr()) {
      for (int k = 0; k < n; ++k) {
        std::string tag = std::to_string(net.buses[k].external_id);
        int re = prog().add_variable("v.re[" + tag + "]");
        int im = prog().add_variable("v.im[" + tag + "]");
        v.v_rect.emplace_back(re, im);
      }
      for (int l : net.tap_branches) {
        std::string tag = std::to_string(l);
        int re = prog().add_variable("w.re[" + tag + "]");
        int im = prog().add_variable("w.im[" + tag + "]");
        v.w_rect[l] = {re, im};
      }
    }
  }

  // lifted branch-flow equalities defining pf, qf, pt, qt
  void flow_rows() {
    auto& v = V();
    for (const Branch& br : net.branches) {
      const std::complex<double> yc = std::conj(br.series_admittance);
      const std::complex<double> fc = shunted_conj(br);
      ComplexExpr sf, st;
      if (br.is_tap()) {
        const TapLift& t = v.tap.at(br.id);
        ComplexExpr w_ll = ComplexExpr::real_var(t.w_ll);
        ComplexExpr w_lm{LinExpr::variable(t.w_lm_re),
                         LinExpr::variable(t.w_lm_im)};
        sf = fc * w_ll - yc * w_lm;
        st = std::complex<double>(-1.0) * (yc * w_lm.conj()) +
             fc * ComplexExpr::real_var(v.v_diag[br.to_bus]);
      } else {
        ComplexExpr v_km = v.V_entry(br.from_bus, br.to_bus);
        sf = fc * ComplexExpr::real_var(v.v_diag[br.from_bus]) - yc * v_km;
        st = std::complex<double>(-1.0) * (yc * v_km.conj()) +
             fc * ComplexExpr::real_var(v.v_diag[br.to_bus]);
      }
      prog().add_equality(LinExpr::variable(v.pf[br.id]) - sf.re);
      prog().add_equality(LinExpr::variable(v.qf[br.id]) - sf.im);
      prog().add_equality(LinExpr::variable(v.pt[br.id]) - st.re);
      prog().add_equality(LinExpr::variable(v.qt[br.id]) - st.im);
    }
  }

  void balance_rows() {
    auto& v = V();
    for (int k = 0; k < net.bus_count(); ++k) {
      LinExpr p, q;
      for (int g : net.gens_by_bus[k]) {
        p += LinExpr::variable(v.pg[g]);
        q += LinExpr::variable(v.qg[g]);
      }
      p.constant -= net.buses[k].p_demand;
      q.constant -= net.buses[k].q_demand;
      int sh = net.shunt_index(k);
      if (sh >= 0) {
        p -= LinExpr::variable(v.xi[sh], net.shunts[sh].g_shunt);
        q += LinExpr::variable(v.xi[sh], net.shunts[sh].b_shunt);
      }
      for (const Branch& br : net.branches) {
        if (br.from_bus == k) {
          p -= LinExpr::variable(v.pf[br.id]);
          q -= LinExpr::variable(v.qf[br.id]);
        }
        if (br.to_bus == k) {
          p -= LinExpr::variable(v.pt[br.id]);
          q -= LinExpr::variable(v.qt[br.id]);
        }
      }
      prog().add_equality(p);
      prog().add_equality(q);
    }
  }

  void box_rows() {
    auto& v = V();
    for (size_t i = 0; i < net.shunts.size(); ++i) {
      prog().add_nonneg(LinExpr::variable(v.xi[i]));
      prog().add_nonneg(LinExpr::variable(v.v_diag[net.shunts[i].bus]) -
                        LinExpr::variable(v.xi[i]));
    }
    for (int k = 0; k < net.bus_count(); ++k) {
      const Bus& b = net.buses[k];
      prog().add_nonneg(LinExpr::variable(v.v_diag[k]) -
                        LinExpr(b.v_min * b.v_min));
      prog().add_nonneg(LinExpr(b.v_max * b.v_max) -
                        LinExpr::variable(v.v_diag[k]));
    }
    for (const Generator& g : net.generators) {
      prog().add_nonneg(LinExpr::variable(v.pg[g.id]) - LinExpr(g.p_min));
      prog().add_nonneg(LinExpr(g.p_max) - LinExpr::variable(v.pg[g.id]));
      prog().add_nonneg(LinExpr::variable(v.qg[g.id]) - LinExpr(g.q_min));
      prog().add_nonneg(LinExpr(g.q_max) - LinExpr::variable(v.qg[g.id]));
    }
    for (const Branch& br : net.branches) {
      if (!br.thermal_limit) continue;
      double s = *br.thermal_limit;
      std::vector<LinExpr> from_cone = {LinExpr(s),
                                        LinExpr::variable(v.pf[br.id]),
                                        LinExpr::variable(v.qf[br.id])};
      prog().add_constraint(Cone::SecondOrder, std::move(from_cone));
      std::vector<LinExpr> to_cone = {LinExpr(s),
                                      LinExpr::variable(v.pt[br.id]),
                                      LinExpr::variable(v.qt[br.id])};
      prog().add_constraint(Cone::SecondOrder, std::move(to_cone));
    }
  }

  void tap_rows() {
    auto& v = V();
    for (int l : net.tap_branches) {
      const Branch& br = net.branches[l];
      const TapLift& t = v.tap.at(l);
      tap_envelope_rows(prog(), kind, br.tap->t_min, br.tap->t_max,
                        LinExpr::variable(v.v_diag[br.from_bus]),
                        LinExpr::variable(t.w_kl), LinExpr::variable(t.w_ll));
    }
  }

  HermitianBlock full_v_block() const {
    const auto& v = out.vars;
    HermitianBlock blk(net.bus_count());
    for (int k = 0; k < net.bus_count(); ++k)
      blk.set_entry(k, k, ComplexExpr::real_var(v.v_diag[k]));
    for (const auto& [key, handles] : v.v_off) {
      auto [a, b] = key;  // a < b, stored value V_ab; block wants (b, a) = conj
      ComplexExpr e{LinExpr::variable(handles.first),
                    LinExpr::variable(handles.second)};
      blk.set_entry(b, a, e.conj());
    }
    return blk;
  }

  void sdr_psd_blocks(const CliqueCover& cover) {
    HermitianBlock vblk = full_v_block();
    if (kind.chordal)
      decompose_psd(prog(), vblk, cover);
    else
      add_hermitian_psd(prog(), vblk);

    auto& v = V();
    for (int l : net.tap_branches) {
      const Branch& br = net.branches[l];
      const TapLift& t = v.tap.at(l);
      HermitianBlock w(3);
      w.set_entry(0, 0, ComplexExpr::real_var(v.v_diag[br.from_bus]));
      w.set_entry(1, 0, ComplexExpr::real_var(t.w_kl));
      w.set_entry(1, 1, ComplexExpr::real_var(t.w_ll));
      w.set_entry(2, 0, v.V_entry(br.to_bus, br.from_bus));
      ComplexExpr w_lm{LinExpr::variable(t.w_lm_re),
                       LinExpr::variable(t.w_lm_im)};
      w.set_entry(2, 1, w_lm.conj());
      w.set_entry(2, 2, ComplexExpr::real_var(v.v_diag[br.to_bus]));
      add_hermitian_psd(prog(), w);
    }
  }

  void tcr_blocks() {
    auto& v = V();
    std::vector<char> covered(net.bus_count(), 0);
    auto vk = [&](int k) {
      return ComplexExpr{LinExpr::variable(v.v_rect[k].first),
                         LinExpr::variable(v.v_rect[k].second)};
    };

    // one 3x3 corner block per distinct non-tap branch pair
    std::set<std::pair<int, int>> done;
    for (const Branch& br : net.branches) {
      if (br.is_tap()) continue;
      int a = std::min(br.from_bus, br.to_bus);
      int b = std::max(br.from_bus, br.to_bus);
      if (!done.insert({a, b}).second) continue;
      HermitianBlock blk(3);
      blk.set_entry(0, 0, ComplexExpr(std::complex<double>(1.0)));
      blk.set_entry(1, 0, vk(a));
      blk.set_entry(2, 0, vk(b));
      blk.set_entry(1, 1, ComplexExpr::real_var(v.v_diag[a]));
      blk.set_entry(2, 1, v.V_entry(b, a));
      blk.set_entry(2, 2, ComplexExpr::real_var(v.v_diag[b]));
      add_hermitian_psd(prog(), blk);
      covered[a] = covered[b] = 1;
    }

    // one 4x4 corner block per tap branch
    for (int l : net.tap_branches) {
      const Branch& br = net.branches[l];
      const TapLift& t = v.tap.at(l);
      int k = br.from_bus, m = br.to_bus;
      ComplexExpr wl{LinExpr::variable(v.w_rect[l].first),
                     LinExpr::variable(v.w_rect[l].second)};
      ComplexExpr w_lm{LinExpr::variable(t.w_lm_re),
                       LinExpr::variable(t.w_lm_im)};
      HermitianBlock blk(4);
      blk.set_entry(0, 0, ComplexExpr(std::complex<double>(1.0)));
      blk.set_entry(1, 0, vk(k));
      blk.set_entry(2, 0, wl);
      blk.set_entry(3, 0, vk(m));
      blk.set_entry(1, 1, ComplexExpr::real_var(v.v_diag[k]));
      blk.set_entry(2, 1, ComplexExpr::real_var(t.w_kl));
      blk.set_entry(2, 2, ComplexExpr::real_var(t.w_ll));
      blk.set_entry(3, 1, v.V_entry(m, k));
      blk.set_entry(3, 2, w_lm.conj());
      blk.set_entry(3, 3, ComplexExpr::real_var(v.v_diag[m]));
      add_hermitian_psd(prog(), blk);
      covered[k] = covered[m] = 1;
    }

    // any bus seen by no block keeps v_k linked to V_kk
    for (int k = 0; k < net.bus_count(); ++k) {
      if (covered[k]) continue;
      HermitianBlock blk(2);
      blk.set_entry(0, 0, ComplexExpr(std::complex<double>(1.0)));
      blk.set_entry(1, 0, vk(k));
      blk.set_entry(1, 1, ComplexExpr::real_var(v.v_diag[k]));
      add_hermitian_psd(prog(), blk);
    }

    // reference-bus cut and angle pin
    int r = net.reference_bus;
    const Bus& rb = net.buses[r];
    prog().add_nonneg(
        LinExpr::variable(v.v_rect[r].first, rb.v_min + rb.v_max) -
        LinExpr::variable(v.v_diag[r]) - LinExpr(rb.v_min * rb.v_max));
    prog().add_equality(LinExpr::variable(v.v_rect[r].second));
  }

  void objective_terms() {
    auto& v = V();
    if (kind.objective == Objective::Cost) {
      for (const Generator& g : net.generators) {
        auto qc = quad_cost_epigraph(prog(), g.cost_c2, g.cost_c1, g.cost_c0,
                                     v.pg[g.id]);
        v.cost_epi.push_back(qc.epigraph_var);
        prog().add_objective(qc.objective);
      }
    } else {
      // total active generation, reported in MW
      for (const Generator& g : net.generators) {
        v.cost_epi.push_back(-1);
        prog().add_objective(LinExpr::variable(v.pg[g.id], net.base_mva));
      }
    }
  }
};

}  // namespace

BuiltRelaxation build_relaxation(const Network& net, RelaxationKind kind) {
  Builder b{net, kind, {}};
  b.out.kind = kind;
  if (kind.is_sdr() && kind.chordal)
    b.out.cover = chordal_extension(build_graph(net));

  b.make_variables(b.out.cover);
  b.flow_rows();
  b.balance_rows();
  b.box_rows();
  b.tap_rows();
  if (kind.is_sdr())
    b.sdr_psd_blocks(b.out.cover);
  else
    b.tcr_blocks();
  b.objective_terms();
  return std::move(b.out);
}

double max_violation(const ConeProgram& prog, const std::vector<double>& x) {
  double worst = 0;
  Eigen::MatrixXd M;
  for (const ConeBlock& blk : prog.blocks()) {
    if (blk.cone == Cone::Zero) {
      for (int r = 0; r < blk.dim; ++r)
        worst = std::max(worst, std::abs(prog.eval_row(blk.first_row + r, x)));
    } else if (blk.cone == Cone::NonNeg) {
      for (int r = 0; r < blk.dim; ++r)
        worst = std::max(worst, -prog.eval_row(blk.first_row + r, x));
    } else if (blk.cone == Cone::SecondOrder) {
      double head = prog.eval_row(blk.first_row, x);
      double nrm = 0;
      for (int r = 1; r < blk.dim; ++r) {
        double val = prog.eval_row(blk.first_row + r, x);
        nrm += val * val;
      }
      worst = std::max(worst, std::sqrt(nrm) - head);
    } else {
      int side = blk.psd_side;
      M.resize(side, side);
      int idx = blk.first_row;
      const double irt2 = 1.0 / std::sqrt(2.0);
      for (int j = 0; j < side; ++j)
        for (int i = j; i < side; ++i, ++idx) {
          double val = prog.eval_row(idx, x);
          if (i != j) val *= irt2;
          M(i, j) = val;
          M(j, i) = val;
        }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M,
                                                        Eigen::EigenvaluesOnly);
      worst = std::max(worst, -es.eigenvalues().minCoeff());
    }
  }
  return worst;
}

std::vector<double> feasibility_embed(const Network& net,
                                      const BuiltRelaxation& built,
                                      const std::vector<double>& u_fixed,
                                      const std::map<int, double>& t_fixed,
                                      const OperatingPoint& point) {
  // seed must satisfy the dispatch equations for the given discretes
  DiscreteAssignment asg;
  asg.u_round.assign(u_fixed.begin(), u_fixed.end());
  for (auto [l, t] : t_fixed) asg.t_round[l] = t;
  double viol = residual_norm(net, asg, point);
  if (viol > 1e-6) throw InfeasibleSeedPoint(viol);

  const LiftedVars& v = built.vars;
  std::vector<double> x(built.program.num_variables(), 0.0);
  auto tap_ratio = [&](int l) {
    auto it = t_fixed.find(l);
    return it == t_fixed.end() ? 1.0 : it->second;
  };

  for (int k = 0; k < net.bus_count(); ++k)
    x[v.v_diag[k]] = std::norm(point.v[k]);
  for (const auto& [key, handles] : v.v_off) {
    std::complex<double> val = point.v[key.first] * std::conj(point.v[key.second]);
    x[handles.first] = val.real();
    x[handles.second] = val.imag();
  }
  for (const auto& [l, t] : v.tap) {
    const Branch& br = net.branches[l];
    double ratio = tap_ratio(l);
    std::complex<double> w = point.v[br.from_bus] / ratio;
    x[t.w_ll] = std::norm(w);
    x[t.w_kl] = (point.v[br.from_bus] * std::conj(w)).real();
    std::complex<double> wlm = w * std::conj(point.v[br.to_bus]);
    x[t.w_lm_re] = wlm.real();
    x[t.w_lm_im] = wlm.imag();
  }
  for (size_t i = 0; i < net.shunts.size(); ++i)
    x[v.xi[i]] = u_fixed[i] * std::norm(point.v[net.shunts[i].bus]);
  for (const Generator& g : net.generators) {
    x[v.pg[g.id]] = point.p_gen[g.id];
    x[v.qg[g.id]] = point.q_gen[g.id];
  }
  for (const Branch& br : net.branches) {
    auto [sf, st] = branch_flow(br, point.v[br.from_bus], point.v[br.to_bus],
                                br.is_tap() ? tap_ratio(br.id) : 1.0);
    x[v.pf[br.id]] = sf.real();
    x[v.qf[br.id]] = sf.imag();
    x[v.pt[br.id]] = st.real();
    x[v.qt[br.id]] = st.imag();
  }
  if (!v.v_rect.empty()) {
    for (int k = 0; k < net.bus_count(); ++k) {
      x[v.v_rect[k].first] = point.v[k].real();
      x[v.v_rect[k].second] = point.v[k].imag();
    }
    for (const auto& [l, handles] : v.w_rect) {
      std::complex<double> w = point.v[net.branches[l].from_bus] / tap_ratio(l);
      x[handles.first] = w.real();
      x[handles.second] = w.imag();
    }
  }
  for (const Generator& g : net.generators) {
    int epi = v.cost_epi.empty() ? -1 : v.cost_epi[g.id];
    if (epi >= 0) x[epi] = g.cost_c2 * point.p_gen[g.id] * point.p_gen[g.id];
  }
  return x;
}

}  // namespace orpd
