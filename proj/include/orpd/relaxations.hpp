//
//  relaxations.hpp
//
//  Builders for the four conic relaxations of the reactive dispatch
//  problem: SDR1/SDR2 (Hermitian PSD on the full voltage matrix plus one
//  3x3 block per tap changer) and TCR1/TCR2 (corner blocks with a unit
//  entry). SDR2/TCR2 tighten the tap coupling to its convex hull.
//

#pragma once

#include <complex>
#include <map>
#include <stdexcept>
#include <vector>

#include "orpd/chordal.hpp"
#include "orpd/cone_program.hpp"
#include "orpd/network.hpp"

namespace orpd {

enum class RelaxationModel { SDR1, TCR1, SDR2, TCR2 };
enum class Objective { Cost, Loss };

const char* to_string(RelaxationModel m);
const char* to_string(Objective o);

struct RelaxationKind {
  RelaxationModel model = RelaxationModel::SDR2;
  Objective objective = Objective::Cost;
  bool chordal = false;      // SDR kinds only: decompose V >= 0 per clique
  bool tcr2_tap_box = false; // optionally keep the two-sided tap bounds in TCR2

  bool is_sdr() const {
    return model == RelaxationModel::SDR1 || model == RelaxationModel::SDR2;
  }
  bool hull_tap() const {
    return model == RelaxationModel::SDR2 || model == RelaxationModel::TCR2;
  }
};

struct TapLift {
  int w_ll = -1;     // W_ll (real)
  int w_kl = -1;     // W_kl (real)
  int w_lm_re = -1;  // W_lm (complex)
  int w_lm_im = -1;
};

// Variable handles for every lifted symbol.
struct LiftedVars {
  std::vector<int> v_diag;  // V_kk per bus
  std::map<std::pair<int, int>, std::pair<int, int>> v_off;  // (k<m) -> re,im
  std::map<int, TapLift> tap;       // branch id -> W handles
  std::vector<int> xi;              // per shunt element
  std::vector<int> pg, qg;          // per generator
  std::vector<int> pf, qf, pt, qt;  // per branch
  std::vector<std::pair<int, int>> v_rect;     // TCR: v_k (re, im) per bus
  std::map<int, std::pair<int, int>> w_rect;   // TCR: w_l per tap branch
  std::vector<int> cost_epi;                   // per generator, -1 if linear

  bool has_v_off(int k, int m) const;
  // V(k,m) as a complex expression, conjugating as needed; k == m allowed
  ComplexExpr V_entry(int k, int m) const;
};

struct BuiltRelaxation {
  ConeProgram program;
  LiftedVars vars;
  RelaxationKind kind;
  CliqueCover cover;  // nonempty when a chordal decomposition was used
};

BuiltRelaxation build_relaxation(const Network& net, RelaxationKind kind);

class DegenerateTapRange : public std::runtime_error {
 public:
  DegenerateTapRange()
      : std::runtime_error("tap range is degenerate (t_min > t_max)") {}
};

// Kind-specific tap-coupling rows between V_kk, W_kl and W_ll.
// For t_min == t_max the coupling collapses to two substitution equalities.
void tap_envelope_rows(ConeProgram& prog, const RelaxationKind& kind,
                       double t_min, double t_max, const LinExpr& v_kk,
                       const LinExpr& w_kl, const LinExpr& w_ll);

class InfeasibleSeedPoint : public std::runtime_error {
 public:
  explicit InfeasibleSeedPoint(double viol)
      : std::runtime_error("seed point violates the dispatch equations by " +
                           std::to_string(viol)) {}
};

// Rank-one lifting of an operating point under fixed discrete settings:
// the returned vector indexes the program's variables and satisfies every
// constraint of the relaxation when the point is feasible.
std::vector<double> feasibility_embed(const Network& net,
                                      const BuiltRelaxation& built,
                                      const std::vector<double>& u_fixed,
                                      const std::map<int, double>& t_fixed,
                                      const OperatingPoint& point);

// Worst constraint violation of an assignment vector against a program
// (sign convention: 0 means feasible, positive means violated).
double max_violation(const ConeProgram& prog, const std::vector<double>& x);

}  // namespace orpd
