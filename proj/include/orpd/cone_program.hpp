//
//  cone_program.hpp
//
//  Sparse conic-program IR over free variables with Zero / NonNeg /
//  SecondOrder / PSD constraint blocks, plus the Hermitian-to-real PSD
//  embedding and the quadratic-cost epigraph rewrite.
//

#pragma once

#include <complex>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace orpd {

// Sparse affine expression  sum coef_i * x_i + constant.
struct LinExpr {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;

  LinExpr() = default;
  /*implicit*/ LinExpr(double c) : constant(c) {}
  static LinExpr variable(int v, double coef = 1.0) {
    LinExpr e;
    if (coef != 0.0) e.terms.emplace_back(v, coef);
    return e;
  }
  LinExpr& add(int v, double coef) {
    if (coef != 0.0) terms.emplace_back(v, coef);
    return *this;
  }
  LinExpr& operator+=(const LinExpr& o);
  LinExpr& operator-=(const LinExpr& o);
  LinExpr& operator*=(double a);
  friend LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
  friend LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
  friend LinExpr operator*(double a, LinExpr e) { return e *= a; }
  LinExpr operator-() const;
  // merge duplicate variables, drop zeros
  void compress();
  double eval(std::span<const double> x) const;
  bool empty() const { return terms.empty(); }
};

// Complex affine expression; imaginary parts of real quantities stay empty.
struct ComplexExpr {
  LinExpr re, im;

  ComplexExpr() = default;
  ComplexExpr(LinExpr r, LinExpr i) : re(std::move(r)), im(std::move(i)) {}
  /*implicit*/ ComplexExpr(std::complex<double> c) : re(c.real()), im(c.imag()) {}
  static ComplexExpr real_var(int v) { return {LinExpr::variable(v), {}}; }

  ComplexExpr conj() const { return {re, -im}; }
  ComplexExpr& operator+=(const ComplexExpr& o);
  ComplexExpr& operator-=(const ComplexExpr& o);
  friend ComplexExpr operator+(ComplexExpr a, const ComplexExpr& b) { return a += b; }
  friend ComplexExpr operator-(ComplexExpr a, const ComplexExpr& b) { return a -= b; }
  friend ComplexExpr operator*(std::complex<double> c, const ComplexExpr& e);
  std::complex<double> eval(std::span<const double> x) const {
    return {re.eval(x), im.eval(x)};
  }
};

enum class Cone { Zero, NonNeg, SecondOrder, Psd };

struct ConeBlock {
  Cone cone;
  int dim;        // row count (svec length for PSD)
  int first_row;  // offset into the stacked row list
  int psd_side;   // matrix side for PSD blocks, 0 otherwise
};

// Symmetric vectorization layout: column-major lower triangle with
// off-diagonal entries scaled by sqrt(2).
inline int svec_dim(int side) { return side * (side + 1) / 2; }
int svec_index(int i, int j, int side);  // requires i >= j

class ConeProgram {
 public:
  int add_variable(const std::string& name);
  int num_variables() const { return static_cast<int>(var_names_.size()); }
  const std::string& variable_name(int v) const { return var_names_[v]; }

  void add_objective(const LinExpr& e);
  const LinExpr& objective() const { return objective_; }
  double objective_value(std::span<const double> x) const {
    return objective_.eval(x);
  }

  // Appends one block; rows.size() must match the cone's dimension rule.
  // Interpretation: the stacked affine vector lies in the cone.
  int add_constraint(Cone cone, std::vector<LinExpr> rows, int psd_side = 0);

  void add_equality(LinExpr e) { add_constraint(Cone::Zero, {std::move(e)}); }
  // e >= 0
  void add_nonneg(LinExpr e) { add_constraint(Cone::NonNeg, {std::move(e)}); }

  int num_rows() const { return static_cast<int>(rows_.size()); }
  const std::vector<ConeBlock>& blocks() const { return blocks_; }
  const LinExpr& row(int r) const { return rows_[r]; }

  double eval_row(int r, std::span<const double> x) const {
    return rows_[r].eval(x);
  }

  // Sparse triplet text dump (versioned) for cross-solver debugging.
  void dump(std::ostream& out) const;

 private:
  std::vector<std::string> var_names_;
  LinExpr objective_;
  std::vector<LinExpr> rows_;
  std::vector<ConeBlock> blocks_;
};

// Hermitian matrix of affine entries, lower triangle stored.
class HermitianBlock {
 public:
  explicit HermitianBlock(int side) : side_(side) {}
  int side() const { return side_; }

  // i >= j; for i == j the imaginary part must be identically zero.
  void set_entry(int i, int j, ComplexExpr e);
  bool has_entry(int i, int j) const;  // i >= j
  // Entry at any (i, j), conjugating above the diagonal; zero if unset.
  ComplexExpr entry(int i, int j) const;

  const std::map<std::pair<int, int>, ComplexExpr>& entries() const {
    return entries_;
  }

 private:
  int side_;
  std::map<std::pair<int, int>, ComplexExpr> entries_;  // key (i,j), i >= j
};

// svec rows of the real symmetric embedding [[X, -Y], [Y, X]] of M = X + jY;
// the embedding is PSD exactly when M is.
std::vector<LinExpr> embed_hermitian_psd(const HermitianBlock& block);

// Adds the embedded block as a PSD constraint of side 2*block.side().
void add_hermitian_psd(ConeProgram& prog, const HermitianBlock& block);

class NegativeQuadCoefficient : public std::runtime_error {
 public:
  NegativeQuadCoefficient()
      : std::runtime_error("quadratic cost coefficient must be nonnegative") {}
};

// Rewrites c2*p^2 + c1*p + c0 as r + c1*p + c0 with r >= c2*p^2 enforced by
// a second-order cone; no cone and no variable when c2 == 0.
struct QuadCostTerm {
  int epigraph_var = -1;  // -1 when c2 == 0
  LinExpr objective;      // r + c1 p + c0   (or c1 p + c0)
};
QuadCostTerm quad_cost_epigraph(ConeProgram& prog, double c2, double c1,
                                double c0, int p_var);

}  // namespace orpd
