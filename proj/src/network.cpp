//
//  network.cpp
//

#include "orpd/network.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>

#include "json.hpp"

namespace orpd {

TapGrid TapGrid::default_grid() {
  TapGrid g;
  g.values.resize(17);
  for (int i = 0; i < 17; ++i) g.values[i] = 0.9 + 0.0125 * i;
  return g;
}

double tap_grid_round(const TapGrid& grid, double t) {
  if (t <= grid.values.front()) return grid.values.front();
  if (t >= grid.values.back()) return grid.values.back();
  double best = grid.values.front();
  double best_d = std::abs(t - best);
  for (double v : grid.values) {
    double d = std::abs(t - v);
    // ties break toward the larger grid value
    if (d < best_d - 1e-15 || (std::abs(d - best_d) <= 1e-15 && v > best)) {
      best = v;
      best_d = d;
    }
  }
  return best;
}

int Network::bus_index(int external_id) const {
  for (const Bus& b : buses)
    if (b.external_id == external_id) return b.id;
  return -1;
}

int Network::shunt_index(int bus) const {
  for (size_t i = 0; i < shunts.size(); ++i)
    if (shunts[i].bus == bus) return static_cast<int>(i);
  return -1;
}

Network build_network(const RawCase& raw) {
  Network net;
  net.name = raw.name;
  net.base_mva = raw.base_mva;
  const double base = raw.base_mva;

  std::map<long long, int> index_of;
  int ref_count = 0;
  for (const auto& row : raw.bus_rows) {
    Bus b;
    b.id = static_cast<int>(net.buses.size());
    b.external_id = static_cast<int>(llround(row[col::BUS_I]));
    b.p_demand = row[col::PD] / base;
    b.q_demand = row[col::QD] / base;
    b.v_min = row[col::VMIN];
    b.v_max = row[col::VMAX];
    b.is_reference = llround(row[col::BUS_TYPE]) == 3;
    b.vm_init = row[col::VM] > 0 ? row[col::VM] : 1.0;
    b.va_init = row[col::VA] * M_PI / 180.0;
    if (b.is_reference) {
      ++ref_count;
      net.reference_bus = b.id;
    }
    index_of[b.external_id] = b.id;
    net.buses.push_back(b);

    if (row[col::GS] != 0.0 || row[col::BS] != 0.0) {
      ShuntElement sh;
      sh.bus = b.id;
      sh.g_shunt = row[col::GS] / base;
      sh.b_shunt = row[col::BS] / base;
      net.shunts.push_back(sh);
    }
  }
  if (ref_count == 0) throw NoReferenceBus();
  if (ref_count > 1) throw MultipleReferenceBuses();

  for (size_t i = 0; i < raw.branch_rows.size(); ++i) {
    const auto& row = raw.branch_rows[i];
    if (row[col::BR_STATUS] == 0) continue;
    Branch br;
    br.id = static_cast<int>(net.branches.size());
    br.from_bus = index_of.at(llround(row[col::F_BUS]));
    br.to_bus = index_of.at(llround(row[col::T_BUS]));
    double r = row[col::BR_R], x = row[col::BR_X];
    if (r == 0.0 && x == 0.0) throw ZeroImpedanceBranch(br.id);
    br.series_admittance = 1.0 / std::complex<double>(r, x);
    br.shunt_susceptance_total = row[col::BR_B];
    if (row[col::SHIFT] != 0.0) throw UnsupportedPhaseShift(br.id);
    if (row[col::RATE_A] > 0.0) br.thermal_limit = row[col::RATE_A] / base;
    if (row[col::TAP] != 0.0) {
      // the nominal ratio is discarded: every tap changer moves on the
      // uniform 0.9..1.1 grid
      br.tap = TapGrid::default_grid();
      net.tap_branches.push_back(br.id);
    }
    net.branches.push_back(br);
  }

  for (size_t i = 0; i < raw.gen_rows.size(); ++i) {
    const auto& row = raw.gen_rows[i];
    if (row[col::GEN_STATUS] == 0) continue;
    Generator g;
    g.id = static_cast<int>(net.generators.size());
    g.bus = index_of.at(llround(row[col::GEN_BUS]));
    g.p_min = row[col::PMIN] / base;
    g.p_max = row[col::PMAX] / base;
    g.q_min = row[col::QMIN] / base;
    g.q_max = row[col::QMAX] / base;
    g.pg_init = row[col::PG] / base;
    g.qg_init = row[col::QG] / base;
    if (!raw.gencost_rows.empty()) {
      const auto& gc = raw.gencost_rows[i];
      int n = static_cast<int>(llround(gc[col::NCOST]));
      double c2 = 0, c1 = 0, c0 = 0;
      if (n >= 3) {
        c2 = gc[col::COST];
        c1 = gc[col::COST + 1];
        c0 = gc[col::COST + 2];
      } else if (n == 2) {
        c1 = gc[col::COST];
        c0 = gc[col::COST + 1];
      } else if (n == 1) {
        c0 = gc[col::COST];
      }
      // rescale so that cost(p in pu) == cost(P in MW)
      g.cost_c2 = c2 * base * base;
      g.cost_c1 = c1 * base;
      g.cost_c0 = c0;
    }
    net.generators.push_back(g);
  }

  net.gens_by_bus.assign(net.buses.size(), {});
  for (const Generator& g : net.generators)
    net.gens_by_bus[g.bus].push_back(g.id);

  // connectivity over in-service branches
  std::vector<std::vector<int>> adj(net.buses.size());
  for (const Branch& br : net.branches) {
    adj[br.from_bus].push_back(br.to_bus);
    adj[br.to_bus].push_back(br.from_bus);
  }
  std::vector<char> seen(net.buses.size(), 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        ++reached;
        q.push(v);
      }
  }
  if (net.buses.size() > 1 && reached != static_cast<int>(net.buses.size()))
    throw DisconnectedNetwork();

  return net;
}

std::pair<std::complex<double>, std::complex<double>> branch_flow(
    const Branch& br, std::complex<double> v_from, std::complex<double> v_to,
    double t) {
  using cx = std::complex<double>;
  const cx y = br.series_admittance;
  const cx jb2(0.0, br.shunt_susceptance_total / 2.0);
  const cx w = v_from / t;
  cx s_from = w * std::conj((jb2 + y) * w - y * v_to);
  cx s_to = v_to * std::conj(-y * w + (jb2 + y) * v_to);
  return {s_from, s_to};
}

std::string Network::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["base_mva"] = base_mva;
  j["reference_bus"] = reference_bus;
  for (const Bus& b : buses)
    j["buses"].push_back({{"id", b.id},
                          {"external_id", b.external_id},
                          {"p_demand", b.p_demand},
                          {"q_demand", b.q_demand},
                          {"v_min", b.v_min},
                          {"v_max", b.v_max},
                          {"is_reference", b.is_reference}});
  for (const Branch& br : branches) {
    nlohmann::json bj = {{"id", br.id},
                         {"from_bus", br.from_bus},
                         {"to_bus", br.to_bus},
                         {"g", br.series_admittance.real()},
                         {"b", br.series_admittance.imag()},
                         {"b_charging", br.shunt_susceptance_total}};
    if (br.thermal_limit) bj["thermal_limit"] = *br.thermal_limit;
    if (br.tap)
      bj["tap"] = {{"t_min", br.tap->t_min},
                   {"t_max", br.tap->t_max},
                   {"step", br.tap->step}};
    j["branches"].push_back(bj);
  }
  for (const Generator& g : generators)
    j["generators"].push_back({{"id", g.id},
                               {"bus", g.bus},
                               {"p_min", g.p_min},
                               {"p_max", g.p_max},
                               {"q_min", g.q_min},
                               {"q_max", g.q_max},
                               {"c2", g.cost_c2},
                               {"c1", g.cost_c1},
                               {"c0", g.cost_c0}});
  for (const ShuntElement& s : shunts)
    j["shunts"].push_back(
        {{"bus", s.bus}, {"g", s.g_shunt}, {"b", s.b_shunt}});
  j["tap_branches"] = tap_branches;
  return j.dump(2);
}

}  // namespace orpd
