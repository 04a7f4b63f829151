//
//  cone_program.cpp
//

#include "orpd/cone_program.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace orpd {

LinExpr& LinExpr::operator+=(const LinExpr& o) {
  terms.insert(terms.end(), o.terms.begin(), o.terms.end());
  constant += o.constant;
  return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& o) {
  for (auto [v, c] : o.terms) terms.emplace_back(v, -c);
  constant -= o.constant;
  return *this;
}

LinExpr& LinExpr::operator*=(double a) {
  for (auto& [v, c] : terms) c *= a;
  constant *= a;
  return *this;
}

LinExpr LinExpr::operator-() const {
  LinExpr e(*this);
  e *= -1.0;
  return e;
}

void LinExpr::compress() {
  std::sort(terms.begin(), terms.end());
  size_t w = 0;
  for (size_t r = 0; r < terms.size();) {
    int v = terms[r].first;
    double sum = 0;
    while (r < terms.size() && terms[r].first == v) sum += terms[r++].second;
    if (sum != 0.0) terms[w++] = {v, sum};
  }
  terms.resize(w);
}

double LinExpr::eval(std::span<const double> x) const {
  double s = constant;
  for (auto [v, c] : terms) s += c * x[v];
  return s;
}

ComplexExpr& ComplexExpr::operator+=(const ComplexExpr& o) {
  re += o.re;
  im += o.im;
  return *this;
}

ComplexExpr& ComplexExpr::operator-=(const ComplexExpr& o) {
  re -= o.re;
  im -= o.im;
  return *this;
}

ComplexExpr operator*(std::complex<double> c, const ComplexExpr& e) {
  ComplexExpr r;
  r.re = c.real() * e.re - c.imag() * e.im;
  r.im = c.real() * e.im + c.imag() * e.re;
  return r;
}

int svec_index(int i, int j, int side) {
  // column-major lower triangle, j <= i
  return j * side - j * (j - 1) / 2 + (i - j);
}

int ConeProgram::add_variable(const std::string& name) {
  var_names_.push_back(name);
  return static_cast<int>(var_names_.size()) - 1;
}

void ConeProgram::add_objective(const LinExpr& e) {
  objective_ += e;
  objective_.compress();
}

int ConeProgram::add_constraint(Cone cone, std::vector<LinExpr> rows,
                                int psd_side) {
  if (cone == Cone::Psd) {
    if (static_cast<int>(rows.size()) != svec_dim(psd_side))
      throw std::invalid_argument("PSD block row count mismatch");
  } else if (psd_side != 0) {
    throw std::invalid_argument("psd_side given for non-PSD block");
  }
  if (cone == Cone::SecondOrder && rows.empty())
    throw std::invalid_argument("empty second-order cone");
  ConeBlock blk{cone, static_cast<int>(rows.size()),
                static_cast<int>(rows_.size()), psd_side};
  blocks_.push_back(blk);
  for (auto& r : rows) {
    r.compress();
    rows_.push_back(std::move(r));
  }
  return static_cast<int>(blocks_.size()) - 1;
}

void ConeProgram::dump(std::ostream& out) const {
  out << "orpd-coneprogram/1\n";
  out << "vars " << num_variables() << "\n";
  for (int v = 0; v < num_variables(); ++v)
    out << "v " << v << " " << var_names_[v] << "\n";
  out << "objective " << objective_.terms.size() << " " << objective_.constant
      << "\n";
  for (auto [v, c] : objective_.terms) out << "o " << v << " " << c << "\n";
  out << "blocks " << blocks_.size() << "\n";
  for (size_t b = 0; b < blocks_.size(); ++b) {
    const ConeBlock& blk = blocks_[b];
    const char* kind = blk.cone == Cone::Zero      ? "zero"
                       : blk.cone == Cone::NonNeg  ? "nonneg"
                       : blk.cone == Cone::SecondOrder ? "soc"
                                                       : "psd";
    out << "block " << b << " " << kind << " " << blk.dim;
    if (blk.cone == Cone::Psd) out << " " << blk.psd_side;
    out << "\n";
    for (int r = 0; r < blk.dim; ++r) {
      const LinExpr& row = rows_[blk.first_row + r];
      out << "row " << r << " " << row.terms.size() << " " << row.constant
          << "\n";
      for (auto [v, c] : row.terms) out << "t " << v << " " << c << "\n";
    }
  }
}

void HermitianBlock::set_entry(int i, int j, ComplexExpr e) {
  if (i < j) throw std::invalid_argument("store lower-triangle entries only");
  if (i == j && !e.im.empty() && !(e.im.terms.empty() && e.im.constant == 0.0))
    throw std::invalid_argument("diagonal entries must be real");
  entries_[{i, j}] = std::move(e);
}

bool HermitianBlock::has_entry(int i, int j) const {
  return entries_.count({i, j}) > 0;
}

ComplexExpr HermitianBlock::entry(int i, int j) const {
  bool conjugate = i < j;
  auto key = conjugate ? std::make_pair(j, i) : std::make_pair(i, j);
  auto it = entries_.find(key);
  if (it == entries_.end()) return {};
  return conjugate ? it->second.conj() : it->second;
}

std::vector<LinExpr> embed_hermitian_psd(const HermitianBlock& block) {
  const int d = block.side();
  const int s = 2 * d;
  const double rt2 = std::sqrt(2.0);
  std::vector<LinExpr> rows(svec_dim(s));

  // T = [[X, -Y], [Y, X]]:  T(a,b)=X(a,b), T(d+a,b)=Y(a,b),
  // T(d+a,d+b)=X(a,b) for a >= b; Y is antisymmetric with zero diagonal.
  for (const auto& [key, e] : block.entries()) {
    auto [i, j] = key;  // i >= j
    if (i == j) {
      rows[svec_index(i, j, s)] += e.re;
      rows[svec_index(d + i, d + j, s)] += e.re;
    } else {
      rows[svec_index(i, j, s)] += rt2 * e.re;
      rows[svec_index(d + i, d + j, s)] += rt2 * e.re;
      // Y(i,j) = Im M(i,j) at T(d+i, j); Y(j,i) = -Im M(i,j) at T(d+j, i)
      rows[svec_index(d + i, j, s)] += rt2 * e.im;
      rows[svec_index(d + j, i, s)] += rt2 * (-e.im);
    }
  }
  return rows;
}

void add_hermitian_psd(ConeProgram& prog, const HermitianBlock& block) {
  prog.add_constraint(Cone::Psd, embed_hermitian_psd(block), 2 * block.side());
}

QuadCostTerm quad_cost_epigraph(ConeProgram& prog, double c2, double c1,
                                double c0, int p_var) {
  if (c2 < 0) throw NegativeQuadCoefficient();
  QuadCostTerm out;
  out.objective = LinExpr::variable(p_var, c1);
  out.objective.constant += c0;
  if (c2 == 0.0) return out;
  int r = prog.add_variable("cost_epi[" + prog.variable_name(p_var) + "]");
  // r >= c2 p^2  <=>  (r+1, r-1, 2 sqrt(c2) p) in SOC(3)
  std::vector<LinExpr> rows(3);
  rows[0] = LinExpr::variable(r) + LinExpr(1.0);
  rows[1] = LinExpr::variable(r) - LinExpr(1.0);
  rows[2] = LinExpr::variable(p_var, 2.0 * std::sqrt(c2));
  prog.add_constraint(Cone::SecondOrder, std::move(rows));
  out.epigraph_var = r;
  out.objective += LinExpr::variable(r);
  return out;
}

}  // namespace orpd
