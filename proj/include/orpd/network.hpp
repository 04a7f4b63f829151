//
//  network.hpp
//
//  Per-unit electrical model: buses, branches, generators, switchable
//  shunts and tap changers, built from a parsed MATPOWER case.
//

#pragma once

#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "orpd/case_io.hpp"

namespace orpd {

struct TapGrid {
  double t_min = 0.9;
  double t_max = 1.1;
  double step = 0.0125;
  std::vector<double> values;  // {t_min, t_min+step, ..., t_max}

  // 0.9 .. 1.1 in steps of 0.0125, 17 settings.
  static TapGrid default_grid();
};

// Nearest grid value; ties round up, out-of-range input clamps to the ends.
double tap_grid_round(const TapGrid& grid, double t);

struct Bus {
  int id = -1;           // internal dense index
  int external_id = -1;  // MATPOWER bus number
  double p_demand = 0, q_demand = 0;  // pu
  double v_min = 0, v_max = 0;        // pu magnitude bounds
  bool is_reference = false;
  double vm_init = 1.0, va_init = 0.0;  // stored profile (pu, radians)
};

struct ShuntElement {
  int bus = -1;          // internal bus index
  double g_shunt = 0;    // pu conductance of the switchable block
  double b_shunt = 0;    // pu susceptance
};

struct Generator {
  int id = -1;
  int bus = -1;
  double p_min = 0, p_max = 0, q_min = 0, q_max = 0;  // pu
  // cost in $/h with power expressed in pu: c2*p^2 + c1*p + c0
  double cost_c2 = 0, cost_c1 = 0, cost_c0 = 0;
  double pg_init = 0, qg_init = 0;  // stored dispatch (pu)
};

struct Branch {
  int id = -1;
  int from_bus = -1;  // tap side
  int to_bus = -1;
  std::complex<double> series_admittance;  // y = 1/(r + jx)
  double shunt_susceptance_total = 0;      // b'
  std::optional<double> thermal_limit;     // s̄ in pu apparent power
  std::optional<TapGrid> tap;

  bool is_tap() const { return tap.has_value(); }
};

struct Network {
  std::string name;
  double base_mva = 0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::vector<ShuntElement> shunts;    // set U
  std::vector<int> tap_branches;       // set T (branch ids)
  std::vector<std::vector<int>> gens_by_bus;
  int reference_bus = -1;

  int bus_count() const { return static_cast<int>(buses.size()); }
  // internal index for a MATPOWER bus number, -1 if absent
  int bus_index(int external_id) const;
  // index into shunts for a bus, -1 if the bus has no switchable shunt
  int shunt_index(int bus) const;
  std::string to_json() const;  // debug dump
};

class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class DisconnectedNetwork : public NetworkError {
 public:
  DisconnectedNetwork() : NetworkError("network graph is not connected") {}
};
class NoReferenceBus : public NetworkError {
 public:
  NoReferenceBus() : NetworkError("no reference bus (type 3) present") {}
};
class MultipleReferenceBuses : public NetworkError {
 public:
  MultipleReferenceBuses() : NetworkError("more than one reference bus") {}
};
class ZeroImpedanceBranch : public NetworkError {
 public:
  explicit ZeroImpedanceBranch(int id)
      : NetworkError("branch " + std::to_string(id) +
                     " has zero series impedance") {}
};
class UnsupportedPhaseShift : public NetworkError {
 public:
  explicit UnsupportedPhaseShift(int id)
      : NetworkError("branch " + std::to_string(id) +
                     " has a nonzero phase shift, which this model does not "
                     "support") {}
};

// Converts a validated RawCase to per-unit form. Buses are renumbered
// densely; out-of-service branches and generators are dropped.
Network build_network(const RawCase& raw);

// Complex power injected at the two ends of a branch for given end voltages
// and tap ratio (t = 1 for lines).
std::pair<std::complex<double>, std::complex<double>> branch_flow(
    const Branch& br, std::complex<double> v_from, std::complex<double> v_to,
    double t);

// A dispatch operating point: complex bus voltages and per-generator
// injections, all per-unit. Flows are derived through branch_flow.
struct OperatingPoint {
  std::vector<std::complex<double>> v;  // per bus
  std::vector<double> p_gen, q_gen;     // per generator
};

}  // namespace orpd
