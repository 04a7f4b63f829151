//
//  conic_solver.cpp
//
//  Homogeneous self-dual embedding:
//
//      A'y + G'z + c tau = 0
//      -A x + b tau = 0
//      -G x + h tau - s = 0
//      -c'x - b'y - h'z - kappa = 0
//      s in K, z in K*, tau >= 0, kappa >= 0, s o z = 0, tau kappa = 0
//
//  where zero-cone rows of the program form (A, b) and the proper cones
//  form (G, h) with s = h - Gx. Newton directions use Nesterov-Todd
//  scaling and a Mehrotra predictor-corrector; the reduced KKT system
//  [[H, A'], [A, 0]] with H = G'(W'W)^{-1}G is solved densely via
//  Cholesky plus a Schur complement on the equality block, with static
//  regularization and iterative refinement.
//

#include "orpd/conic_solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

namespace orpd {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::Unbounded: return "Unbounded";
    case SolveStatus::NumericalFailure: return "NumericalFailure";
    case SolveStatus::IterLimit: return "IterLimit";
  }
  return "?";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ConeSeg {
  Cone kind;
  int dim;     // rows in the m-space
  int side;    // PSD matrix side
  int offset;  // start row within the cone part
};

// one PSD matrix entry of a variable's column: coef * Sym(a,b)
struct MatEntry {
  int a, b;
  double coef;
};

struct PsdVarCol {
  int var;
  std::vector<MatEntry> entries;
};

struct Layout {
  int n = 0, p = 0, m = 0;
  SpMat A, G;     // p x n, m x n
  VectorXd b, h, c;
  double cost_scale = 1.0;   // internal objective scaling
  VectorXd col_scale;        // x = col_scale .* x_internal
  VectorXd eq_row_scale;     // z_orig = eq_row_scale .* y_internal (zero rows)
  VectorXd cone_row_scale;   // z_orig = cone_row_scale .* z_internal
  std::vector<ConeSeg> segs;
  std::vector<int> prog_row_of_eq;    // p entries -> program row index
  std::vector<int> prog_row_of_cone;  // m entries -> program row index
  // per PSD segment: variable columns with their symmetric-matrix entries
  std::vector<std::vector<PsdVarCol>> psd_cols;
  // per SOC segment: (local row, var, coef) triplets
  std::vector<std::vector<std::array<double, 3>>> soc_cols;
  double barrier_degree = 0;
  bool trivial_infeasible = false;
};

void svec_to_mat(const Eigen::Ref<const VectorXd>& v, MatrixXd& M, int side) {
  const double inv_rt2 = 1.0 / std::sqrt(2.0);
  int k = 0;
  for (int j = 0; j < side; ++j)
    for (int i = j; i < side; ++i, ++k) {
      double val = (i == j) ? v[k] : v[k] * inv_rt2;
      M(i, j) = val;
      M(j, i) = val;
    }
}

void mat_to_svec(const MatrixXd& M, Eigen::Ref<VectorXd> v, int side) {
  const double rt2 = std::sqrt(2.0);
  int k = 0;
  for (int j = 0; j < side; ++j)
    for (int i = j; i < side; ++i, ++k)
      v[k] = (i == j) ? M(i, j) : rt2 * M(i, j);
}

Layout build_layout(const ConeProgram& prog) {
  Layout L;
  L.n = prog.num_variables();
  std::vector<Triplet> at, gt;
  std::vector<double> bv, hv;

  for (const ConeBlock& blk : prog.blocks()) {
    if (blk.cone == Cone::Zero) {
      for (int r = 0; r < blk.dim; ++r) {
        const LinExpr& e = prog.row(blk.first_row + r);
        if (e.terms.empty()) {
          if (std::abs(e.constant) > 1e-12) L.trivial_infeasible = true;
          continue;  // 0 = 0 rows are dropped
        }
        int row = static_cast<int>(bv.size());
        for (auto [v, cfc] : e.terms) at.emplace_back(row, v, cfc);
        bv.push_back(-e.constant);
        L.prog_row_of_eq.push_back(blk.first_row + r);
      }
    } else {
      ConeSeg seg{blk.cone, blk.dim, blk.psd_side,
                  static_cast<int>(hv.size())};
      for (int r = 0; r < blk.dim; ++r) {
        const LinExpr& e = prog.row(blk.first_row + r);
        int row = static_cast<int>(hv.size());
        for (auto [v, cfc] : e.terms) gt.emplace_back(row, v, -cfc);
        hv.push_back(e.constant);
        L.prog_row_of_cone.push_back(blk.first_row + r);
      }
      L.segs.push_back(seg);
      if (blk.cone == Cone::NonNeg)
        L.barrier_degree += blk.dim;
      else if (blk.cone == Cone::SecondOrder)
        L.barrier_degree += 1;
      else
        L.barrier_degree += blk.psd_side;
    }
  }

  L.p = static_cast<int>(bv.size());
  L.m = static_cast<int>(hv.size());
  L.A.resize(L.p, L.n);
  L.A.setFromTriplets(at.begin(), at.end());
  L.G.resize(L.m, L.n);
  L.G.setFromTriplets(gt.begin(), gt.end());
  L.b = Eigen::Map<VectorXd>(bv.data(), L.p);
  L.h = Eigen::Map<VectorXd>(hv.data(), L.m);

  L.c = VectorXd::Zero(L.n);
  for (auto [v, cfc] : prog.objective().terms) L.c[v] += cfc;
  return L;
}

// Diagonal equilibration: per-column scaling over [A;G], per-row scaling for
// equalities and nonneg rows, single uniform scalar per SOC/PSD block, plus
// objective normalization. Two Ruiz-style sweeps.
void equilibrate(Layout& L) {
  L.col_scale = VectorXd::Ones(L.n);
  L.eq_row_scale = VectorXd::Ones(L.p);
  L.cone_row_scale = VectorXd::Ones(L.m);

  auto clip = [](double v) {
    v = std::sqrt(v);
    if (v < 1e-4) v = 1e-4;
    if (v > 1e4) v = 1e4;
    return 1.0 / v;
  };

  for (int pass = 0; pass < 2; ++pass) {
    VectorXd colmax = VectorXd::Zero(L.n);
    for (int k = 0; k < L.A.outerSize(); ++k)
      for (SpMat::InnerIterator it(L.A, k); it; ++it)
        colmax[it.col()] = std::max(colmax[it.col()], std::abs(it.value()));
    for (int k = 0; k < L.G.outerSize(); ++k)
      for (SpMat::InnerIterator it(L.G, k); it; ++it)
        colmax[it.col()] = std::max(colmax[it.col()], std::abs(it.value()));
    VectorXd e(L.n);
    for (int j = 0; j < L.n; ++j) e[j] = colmax[j] > 0 ? clip(colmax[j]) : 1.0;
    L.col_scale = L.col_scale.cwiseProduct(e);
    L.A = L.A * e.asDiagonal();
    L.G = L.G * e.asDiagonal();

    VectorXd eqmax = VectorXd::Zero(L.p);
    for (int k = 0; k < L.A.outerSize(); ++k)
      for (SpMat::InnerIterator it(L.A, k); it; ++it)
        eqmax[it.row()] = std::max(eqmax[it.row()], std::abs(it.value()));
    VectorXd de(L.p);
    for (int i = 0; i < L.p; ++i) de[i] = eqmax[i] > 0 ? clip(eqmax[i]) : 1.0;
    L.eq_row_scale = L.eq_row_scale.cwiseProduct(de);
    L.A = de.asDiagonal() * L.A;
    L.b = L.b.cwiseProduct(de);

    VectorXd conemax = VectorXd::Zero(L.m);
    for (int k = 0; k < L.G.outerSize(); ++k)
      for (SpMat::InnerIterator it(L.G, k); it; ++it)
        conemax[it.row()] = std::max(conemax[it.row()], std::abs(it.value()));
    VectorXd dc = VectorXd::Ones(L.m);
    for (const ConeSeg& seg : L.segs) {
      if (seg.kind == Cone::NonNeg) {
        for (int r = 0; r < seg.dim; ++r) {
          double mx = std::max(conemax[seg.offset + r],
                               std::abs(L.h[seg.offset + r]));
          dc[seg.offset + r] = mx > 0 ? clip(mx) : 1.0;
        }
      } else {
        double mx = 0;
        for (int r = 0; r < seg.dim; ++r)
          mx = std::max({mx, conemax[seg.offset + r],
                         std::abs(L.h[seg.offset + r])});
        double sc = mx > 0 ? clip(mx) : 1.0;
        for (int r = 0; r < seg.dim; ++r) dc[seg.offset + r] = sc;
      }
    }
    L.cone_row_scale = L.cone_row_scale.cwiseProduct(dc);
    L.G = dc.asDiagonal() * L.G;
    L.h = L.h.cwiseProduct(dc);
  }

  L.c = L.c.cwiseProduct(L.col_scale);
  double cmax = L.c.size() ? L.c.cwiseAbs().maxCoeff() : 0.0;
  L.cost_scale = cmax > 1.0 ? 1.0 / cmax : 1.0;
  L.c *= L.cost_scale;
}

// Per-variable PSD entry lists and SOC column triplets, built after scaling.
void build_cone_columns(Layout& L) {
  const double inv_rt2 = 1.0 / std::sqrt(2.0);
  L.psd_cols.resize(L.segs.size());
  L.soc_cols.resize(L.segs.size());

  // row -> (segment, local row)
  std::vector<int> seg_of_row(L.m, -1), loc_of_row(L.m, 0);
  for (size_t si = 0; si < L.segs.size(); ++si)
    for (int r = 0; r < L.segs[si].dim; ++r) {
      seg_of_row[L.segs[si].offset + r] = static_cast<int>(si);
      loc_of_row[L.segs[si].offset + r] = r;
    }

  // decode svec local row -> (i, j)
  std::vector<std::vector<std::pair<int, int>>> ij_of(L.segs.size());
  for (size_t si = 0; si < L.segs.size(); ++si) {
    if (L.segs[si].kind != Cone::Psd) continue;
    int side = L.segs[si].side;
    ij_of[si].resize(svec_dim(side));
    int k = 0;
    for (int j = 0; j < side; ++j)
      for (int i = j; i < side; ++i, ++k) ij_of[si][k] = {i, j};
  }

  std::vector<std::map<int, std::vector<MatEntry>>> acc(L.segs.size());
  for (int col = 0; col < L.G.outerSize(); ++col) {
    for (SpMat::InnerIterator it(L.G, col); it; ++it) {
      int si = seg_of_row[it.row()];
      const ConeSeg& seg = L.segs[si];
      if (seg.kind == Cone::Psd) {
        auto [i, j] = ij_of[si][loc_of_row[it.row()]];
        double coef = (i == j) ? it.value() : it.value() * inv_rt2;
        acc[si][col].push_back({i, j, coef});
      } else if (seg.kind == Cone::SecondOrder) {
        L.soc_cols[si].push_back(
            {double(loc_of_row[it.row()]), double(col), it.value()});
      }
    }
  }
  for (size_t si = 0; si < L.segs.size(); ++si)
    for (auto& [var, entries] : acc[si])
      L.psd_cols[si].push_back({var, std::move(entries)});
}

// Nesterov-Todd scaling state for all cone segments.
struct Scaling {
  // NonNeg: w such that W = diag(w)
  std::vector<VectorXd> nn_w;
  // SOC: (eta, v) with W = eta (2 v v' - J), v'Jv = 1
  std::vector<std::pair<double, VectorXd>> soc;
  // PSD: R, Rinv, Q = Rinv' * Rinv, lambda diag
  struct PsdScale {
    MatrixXd R, Rinv, Q;
    VectorXd sigma;
  };
  std::vector<PsdScale> psd;
  VectorXd lambda;  // scaled point, m-dim
};

class ConeOps {
 public:
  explicit ConeOps(const Layout& L) : L_(L) {}

  VectorXd identity() const {
    VectorXd e = VectorXd::Zero(L_.m);
    for (const ConeSeg& seg : L_.segs) {
      if (seg.kind == Cone::NonNeg)
        e.segment(seg.offset, seg.dim).setOnes();
      else if (seg.kind == Cone::SecondOrder)
        e[seg.offset] = 1.0;
      else {
        int k = seg.offset;
        for (int j = 0; j < seg.side; ++j)
          for (int i = j; i < seg.side; ++i, ++k)
            if (i == j) e[k] = 1.0;
      }
    }
    return e;
  }

  // true if the NT scaling could be formed (requires strict interiority)
  bool update(const VectorXd& s, const VectorXd& z, Scaling& W) const {
    W.nn_w.assign(L_.segs.size(), {});
    W.soc.assign(L_.segs.size(), {});
    W.psd.assign(L_.segs.size(), {});
    W.lambda = VectorXd::Zero(L_.m);
    for (size_t si = 0; si < L_.segs.size(); ++si) {
      const ConeSeg& seg = L_.segs[si];
      auto sv = s.segment(seg.offset, seg.dim);
      auto zv = z.segment(seg.offset, seg.dim);
      if (seg.kind == Cone::NonNeg) {
        if ((sv.array() <= 0).any() || (zv.array() <= 0).any()) return false;
        W.nn_w[si] = (sv.array() / zv.array()).sqrt();
        W.lambda.segment(seg.offset, seg.dim) =
            (sv.array() * zv.array()).sqrt();
      } else if (seg.kind == Cone::SecondOrder) {
        double s0 = sv[0], z0 = zv[0];
        double sres = s0 * s0 - sv.tail(seg.dim - 1).squaredNorm();
        double zres = z0 * z0 - zv.tail(seg.dim - 1).squaredNorm();
        if (s0 <= 0 || z0 <= 0 || sres <= 0 || zres <= 0) return false;
        double rho_s = std::sqrt(sres), rho_z = std::sqrt(zres);
        VectorXd sb = sv / rho_s, zb = zv / rho_z;
        double dot = sb.dot(zb);
        double gamma = std::sqrt((1.0 + dot) / 2.0);
        // scaling point wbar, then the half-angle vector v so that
        // (2vv' - J)^2 = 2 wbar wbar' - J = P(wbar)
        VectorXd wbar = sb;
        wbar[0] += zb[0];
        wbar.tail(seg.dim - 1) -= zb.tail(seg.dim - 1);
        wbar /= (2.0 * gamma);
        VectorXd v = wbar;
        v[0] += 1.0;
        v /= std::sqrt(2.0 * (wbar[0] + 1.0));
        double eta = std::sqrt(rho_s / rho_z);
        W.soc[si] = {eta, v};
        // lambda = W z
        W.lambda.segment(seg.offset, seg.dim) = soc_apply(eta, v, zv);
      } else {
        int d = seg.side;
        MatrixXd S(d, d), Z(d, d);
        svec_to_mat(sv, S, d);
        svec_to_mat(zv, Z, d);
        Eigen::LLT<MatrixXd> ls(S), lz(Z);
        if (ls.info() != Eigen::Success || lz.info() != Eigen::Success)
          return false;
        MatrixXd Ls = ls.matrixL();
        MatrixXd Lz = lz.matrixL();
        Eigen::JacobiSVD<MatrixXd> svd(Lz.transpose() * Ls,
                                       Eigen::ComputeThinU | Eigen::ComputeThinV);
        VectorXd sig = svd.singularValues();
        if ((sig.array() <= 0).any()) return false;
        VectorXd isq = sig.array().sqrt().inverse();
        Scaling::PsdScale ps;
        ps.R = Ls * svd.matrixV() * isq.asDiagonal();
        ps.Rinv = isq.asDiagonal() * svd.matrixU().transpose() * Lz.transpose();
        ps.Q = ps.Rinv.transpose() * ps.Rinv;
        ps.sigma = sig;
        int k = seg.offset;
        for (int j = 0; j < d; ++j)
          for (int i = j; i < d; ++i, ++k) W.lambda[k] = (i == j) ? sig[j] : 0.0;
        W.psd[si] = std::move(ps);
      }
    }
    return true;
  }

  static VectorXd soc_apply(double eta, const VectorXd& v,
                            const Eigen::Ref<const VectorXd>& u) {
    // W u = eta (2 v (v'u) - J u)
    VectorXd r = u;  // -J u = (-u0, u1)
    r[0] = -u[0];
    r += 2.0 * v * v.dot(u);
    return eta * r;
  }
  static VectorXd soc_apply_inv(double eta, const VectorXd& v,
                                const Eigen::Ref<const VectorXd>& u) {
    // H J H = J  =>  W^{-1} = (1/eta) J H J with H = 2vv' - J
    VectorXd ju = -u;
    ju[0] = u[0];
    VectorXd hju = ju;  // H (J u)
    hju[0] = -ju[0];
    hju += 2.0 * v * v.dot(ju);
    VectorXd r = -hju;  // J H J u
    r[0] = hju[0];
    return r / eta;
  }

  // v <- W u (W symmetric)
  VectorXd apply_W(const Scaling& W, const VectorXd& u) const {
    VectorXd r(L_.m);
    for (size_t si = 0; si < L_.segs.size(); ++si) {
      const ConeSeg& seg = L_.segs[si];
      auto uv = u.segment(seg.offset, seg.dim);
      if (seg.kind == Cone::NonNeg)
        r.segment(seg.offset, seg.dim) = W.nn_w[si].cwiseProduct(uv);
      else if (seg.kind == Cone::SecondOrder)
        r.segment(seg.offset, seg.dim) =
            soc_apply(W.soc[si].first, W.soc[si].second, uv);
      else {
        int d = seg.side;
        MatrixXd U(d, d);
        svec_to_mat(uv, U, d);
        MatrixXd V = W.psd[si].R.transpose() * U * W.psd[si].R;
        V = 0.5 * (V + V.transpose()).eval();
        mat_to_svec(V, r.segment(seg.offset, seg.dim), d);
      }
    }
    return r;
  }

  // v <- W' u ; for NonNeg/SOC W' = W, for PSD W'u = svec(R mat(u) R')
  VectorXd apply_Wt(const Scaling& W, const VectorXd& u) const {
    VectorXd r(L_.m);
    for (size_t si = 0; si < L_.segs.size(); ++si) {
      const ConeSeg& seg = L_.segs[si];
      auto uv = u.segment(seg.offset, seg.dim);
      if (seg.kind == Cone::NonNeg)
        r.segment(seg.offset, seg.dim) = W.nn_w[si].cwiseProduct(uv);
      else if (seg.kind == Cone::SecondOrder)
        r.segment(seg.offset, seg.dim) =
            soc_apply(W.soc[si].first, W.soc[si].second, uv);
      else {
        int d = seg.side;
        MatrixXd U(d, d);
        svec_to_mat(uv, U, d);
        MatrixXd V = W.psd[si].R * U * W.psd[si].R.transpose();
        V = 0.5 * (V + V.transpose()).eval();
        mat_to_svec(V, r.segment(seg.offset, seg.dim), d);
      }
    }
    return r;
  }

  // v <- W^{-T} u ; PSD: svec(Rinv mat(u) Rinv')
  VectorXd apply_Winv_t(const Scaling& W, const VectorXd& u) const {
    VectorXd r(L_.m);
    for (size_t si = 0; si < L_.segs.size(); ++si) {
      const ConeSeg& seg = L_.segs[si];
      auto uv = u.segment(seg.offset, seg.dim);
      if (seg.kind == Cone::NonNeg)
        r.segment(seg.offset, seg.dim) = uv.cwiseQuotient(W.nn_w[si]);
      else if (seg.kind == Cone::SecondOrder)
        r.segment(seg.offset, seg.dim) =
            soc_apply_inv(W.soc[si].first, W.soc[si].second, uv);
      else {
        int d = seg.side;
        MatrixXd U(d, d);
        svec_to_mat(uv, U, d);
        MatrixXd V = W.psd[si].Rinv * U * W.psd[si].Rinv.transpose();
        V = 0.5 * (V + V.transpose()).eval();
        mat_to_svec(V, r.segment(seg.offset, seg.dim), d);
      }
    }
    return r;
  }

  // v <- (W'W)^{-1} u ; PSD: svec(Q mat(u) Q)
  VectorXd apply_WtW_inv(const Scaling& W, const VectorXd& u) const {
    VectorXd r(L_.m);
    for (size_t si = 0; si < L_.segs.size(); ++si) {
      const ConeSeg& seg = L_.segs[si];
      auto uv = u.segment(seg.offset, seg.dim);
      if (seg.kind == Cone::NonNeg)
        r.segment(seg.offset, seg.dim) =
            uv.cwiseQuotient(W.nn_w[si].cwiseProduct(W.nn_w[si]));
      else if (seg.kind == Cone::SecondOrder) {
        auto& [eta, wbar] = W.soc[si];
        r.segment(seg.offset, seg.dim) =
            soc_apply_inv(eta, wbar, soc_apply_inv(eta, wbar, uv));
      } else {
        int d = seg.side;
        MatrixXd U(d, d);
        svec_to_mat(uv, U, d);
        MatrixXd V = W.psd[si].Q * U * W.psd[si].Q;
        V = 0.5 * (V + V.transpose()).eval();
        mat_to_svec(V, r.segment(seg.offset, seg.dim), d);
      }
    }
    return r;
  }

  // Jordan product u o v
  VectorXd jprod(const VectorXd& u, const VectorXd& v) const {
    VectorXd r(L_.m);
    for (const ConeSeg& seg : L_.segs) {
      auto uv = u.segment(seg.offset, seg.dim);
      auto vv = v.segment(seg.offset, seg.dim);
      if (seg.kind == Cone::NonNeg)
        r.segment(seg.offset, seg.dim) = uv.cwiseProduct(vv);
      else if (seg.kind == Cone::SecondOrder) {
        r[seg.offset] = uv.dot(vv);
        r.segment(seg.offset + 1, seg.dim - 1) =
            uv[0] * vv.tail(seg.dim - 1) + vv[0] * uv.tail(seg.dim - 1);
      } else {
        int d = seg.side;
        MatrixXd U(d, d), V(d, d);
        svec_to_mat(uv, U, d);
        svec_to_mat(vv, V, d);
        MatrixXd P = 0.5 * (U * V + V * U);
        mat_to_svec(P, r.segment(seg.offset, seg.dim), d);
      }
    }
    return r;
  }

  // u <- lambda \ d (inverse Jordan product against the scaled point)
  VectorXd jdiv_lambda(const Scaling& W, const VectorXd& d) const {
    VectorXd r(L_.m);
    for (size_t si = 0; si < L_.segs.size(); ++si) {
      const ConeSeg& seg = L_.segs[si];
      auto dv = d.segment(seg.offset, seg.dim);
      auto lv = W.lambda.segment(seg.offset, seg.dim);
      if (seg.kind == Cone::NonNeg)
        r.segment(seg.offset, seg.dim) = dv.cwiseQuotient(lv);
      else if (seg.kind == Cone::SecondOrder) {
        double l0 = lv[0];
        auto l1 = lv.tail(seg.dim - 1);
        double det = l0 * l0 - l1.squaredNorm();
        double u0 = (l0 * dv[0] - l1.dot(dv.tail(seg.dim - 1))) / det;
        r[seg.offset] = u0;
        r.segment(seg.offset + 1, seg.dim - 1) =
            (dv.tail(seg.dim - 1) - u0 * l1) / l0;
      } else {
        int d2 = seg.side;
        const VectorXd& sig = W.psd[si].sigma;
        MatrixXd D(d2, d2);
        svec_to_mat(dv, D, d2);
        for (int j = 0; j < d2; ++j)
          for (int i = 0; i < d2; ++i) D(i, j) *= 2.0 / (sig[i] + sig[j]);
        mat_to_svec(D, r.segment(seg.offset, seg.dim), d2);
      }
    }
    return r;
  }

  // largest step alpha_max with u + alpha du in K
  double max_step(const VectorXd& u, const VectorXd& du) const {
    double amax = kInf;
    for (const ConeSeg& seg : L_.segs) {
      auto uv = u.segment(seg.offset, seg.dim);
      auto dv = du.segment(seg.offset, seg.dim);
      if (seg.kind == Cone::NonNeg) {
        for (int i = 0; i < seg.dim; ++i)
          if (dv[i] < 0) amax = std::min(amax, -uv[i] / dv[i]);
      } else if (seg.kind == Cone::SecondOrder) {
        // smallest positive root of f(a) = (u0+a d0)^2 - ||u1+a d1||^2,
        // f(0) > 0 in the interior; the u0+a d0 >= 0 branch cannot be hit
        // before f reaches zero
        double qa = dv[0] * dv[0] - dv.tail(seg.dim - 1).squaredNorm();
        double qb = uv[0] * dv[0] - uv.tail(seg.dim - 1).dot(dv.tail(seg.dim - 1));
        double qc = uv[0] * uv[0] - uv.tail(seg.dim - 1).squaredNorm();
        double bound = kInf;
        if (std::abs(qa) < 1e-300) {
          if (qb < 0) bound = -qc / (2.0 * qb);
        } else {
          double disc = qb * qb - qa * qc;
          if (disc >= 0) {
            double sq = std::sqrt(disc);
            double q = -(qb + (qb >= 0 ? sq : -sq));
            double r1 = q / qa;
            double r2 = (q != 0.0) ? qc / q : kInf;
            for (double root : {r1, r2})
              if (std::isfinite(root) && root > 0) bound = std::min(bound, root);
          }
        }
        if (dv[0] < 0) bound = std::min(bound, -uv[0] / dv[0]);
        amax = std::min(amax, bound);
      } else {
        int d = seg.side;
        MatrixXd U(d, d), D(d, d);
        svec_to_mat(uv, U, d);
        svec_to_mat(dv, D, d);
        Eigen::LLT<MatrixXd> llt(U);
        if (llt.info() != Eigen::Success) return 0.0;
        MatrixXd Lm = llt.matrixL();
        MatrixXd T = Lm.template triangularView<Eigen::Lower>().solve(D);
        MatrixXd T2 = Lm.template triangularView<Eigen::Lower>()
                          .solve(T.transpose())
                          .transpose();
        MatrixXd Ts = 0.5 * (T2 + T2.transpose());
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(Ts,
                                                   Eigen::EigenvaluesOnly);
        double lmin = es.eigenvalues().minCoeff();
        if (lmin < 0) amax = std::min(amax, -1.0 / lmin);
      }
    }
    return amax;
  }

  // membership margin: most negative slack across cones (0 if interior)
  double min_margin(const VectorXd& u) const {
    double margin = kInf;
    for (const ConeSeg& seg : L_.segs) {
      auto uv = u.segment(seg.offset, seg.dim);
      if (seg.kind == Cone::NonNeg) {
        margin = std::min(margin, uv.minCoeff());
      } else if (seg.kind == Cone::SecondOrder) {
        margin = std::min(margin, uv[0] - uv.tail(seg.dim - 1).norm());
      } else {
        MatrixXd U(seg.side, seg.side);
        svec_to_mat(uv, U, seg.side);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(U, Eigen::EigenvaluesOnly);
        margin = std::min(margin, es.eigenvalues().minCoeff());
      }
    }
    return margin;
  }

 private:
  const Layout& L_;
};

// Dense reduced-KKT factorization [[H + dI, A'], [A, -dI]] via Cholesky of
// the (1,1) block and a Schur complement, with iterative refinement against
// the unregularized system.
class KktSolver {
 public:
  KktSolver(const Layout& L, const ConeOps& ops) : L_(L), ops_(ops) {
    // estimated fill of H decides between the dense Schur route and a
    // sparse quasidefinite LDLT of the full reduced KKT
    long long nnz = 0;
    for (size_t si = 0; si < L.segs.size(); ++si) {
      const ConeSeg& seg = L.segs[si];
      if (seg.kind == Cone::Psd) {
        long long k = static_cast<long long>(L.psd_cols[si].size());
        nnz += k * k;
      } else if (seg.kind == Cone::SecondOrder) {
        long long k = static_cast<long long>(L.soc_cols[si].size());
        nnz += k * k;
      }
    }
    for (int r = 0; r < L.m; ++r) nnz += 16;  // nonneg rows are short
    long long dim = L.n;
    use_sparse_ = dim > 400 && nnz < dim * dim / 12;
    if (!use_sparse_) {
      Ad_ = MatrixXd(L.A);
      H_.resize(L.n, L.n);
    }
  }

  bool factor(const Scaling& W, double delta) {
    delta_ = delta;
    if (use_sparse_) return factor_sparse(W);
    assemble_H(W);
    Eigen::LLT<MatrixXd> llt;
    MatrixXd M = H_;
    M.diagonal().array() += delta_;
    llt.compute(M);
    int tries = 0;
    while (llt.info() != Eigen::Success && tries < 6) {
      delta_ *= 100.0;
      M = H_;
      M.diagonal().array() += delta_;
      llt.compute(M);
      ++tries;
    }
    if (llt.info() != Eigen::Success) return false;
    lltH_ = std::move(llt);
    if (L_.p > 0) {
      MatrixXd X = lltH_.solve(Ad_.transpose());
      MatrixXd S = Ad_ * X;
      S.diagonal().array() += delta_;
      lltS_.compute(S);
      if (lltS_.info() != Eigen::Success) return false;
    }
    return true;
  }

  // Full inner solve K(dx,dy,dz) = (f, g, w), refining against the
  // unreduced 3x3 system so that dual recovery stays accurate when the
  // scaling becomes extreme near convergence.
  void solve3(const Scaling& W, const VectorXd& f, const VectorXd& g,
              const VectorXd& w, VectorXd& dx, VectorXd& dy,
              VectorXd& dz) const {
    base3(W, f, g, w, dx, dy, dz);
    double scale = std::max({1.0, f.lpNorm<Eigen::Infinity>(),
                             L_.p ? g.lpNorm<Eigen::Infinity>() : 0.0,
                             w.size() ? w.lpNorm<Eigen::Infinity>() : 0.0});
    VectorXd bx = dx, by = dy, bz = dz;
    double best = kInf, prev = kInf;
    for (int it = 0; it < 10; ++it) {
      VectorXd r1 = f - L_.G.transpose() * dz;
      if (L_.p) r1 -= L_.A.transpose() * dy;
      VectorXd r2 = L_.p ? VectorXd(g - L_.A * dx) : VectorXd();
      VectorXd r3 =
          w - L_.G * dx + ops_.apply_Wt(W, ops_.apply_W(W, dz));
      double rn = std::max({r1.lpNorm<Eigen::Infinity>(),
                            L_.p ? r2.lpNorm<Eigen::Infinity>() : 0.0,
                            r3.size() ? r3.lpNorm<Eigen::Infinity>() : 0.0});
      if (rn < best) {
        best = rn;
        bx = dx;
        by = dy;
        bz = dz;
      }
      if (rn <= 1e-14 * scale || rn >= 0.9 * prev) break;
      prev = rn;
      VectorXd cx, cy, cz;
      base3(W, r1, r2, r3, cx, cy, cz);
      dx += cx;
      if (L_.p) dy += cy;
      dz += cz;
    }
    achieved_residual_ = best / scale;
    dx = bx;
    dy = by;
    dz = bz;
  }

  double achieved_residual() const { return achieved_residual_; }

 private:
  void base3(const Scaling& W, const VectorXd& f, const VectorXd& g,
             const VectorXd& w, VectorXd& dx, VectorXd& dy,
             VectorXd& dz) const {
    VectorXd rhs1 = f + L_.G.transpose() * ops_.apply_WtW_inv(W, w);
    solve_reg(rhs1, g, dx, dy);
    dz = ops_.apply_WtW_inv(W, VectorXd(L_.G * dx - w));
  }

  void solve_reg(const VectorXd& f, const VectorXd& g, VectorXd& dx,
                 VectorXd& dy) const {
    if (use_sparse_) {
      VectorXd rhs(L_.n + L_.p);
      rhs.head(L_.n) = f;
      if (L_.p) rhs.tail(L_.p) = g;
      VectorXd sol = sldlt_.solve(rhs);
      dx = sol.head(L_.n);
      dy = L_.p ? VectorXd(sol.tail(L_.p)) : VectorXd();
      return;
    }
    VectorXd u0 = lltH_.solve(f);
    if (L_.p > 0) {
      VectorXd rhs = Ad_ * u0 - g;
      dy = lltS_.solve(rhs);
      dx = lltH_.solve(f - Ad_.transpose() * dy);
    } else {
      dy.resize(0);
      dx = u0;
    }
  }

  bool factor_sparse(const Scaling& W) {
    htrip_.clear();
    auto addH = [&](int i, int j, double v) {
      if (i >= j) htrip_.emplace_back(i, j, v);  // lower triangle
    };
    assemble_H_entries(W, addH);
    size_t base = htrip_.size();
    for (int k = 0; k < L_.A.outerSize(); ++k)
      for (SpMat::InnerIterator it(L_.A, k); it; ++it)
        htrip_.emplace_back(L_.n + it.row(), it.col(), it.value());
    // static reg keeps the LDL pivots away from cancellation zeros
    delta_ = std::max(delta_, 1e-8);
    for (int attempt = 0; attempt < 6; ++attempt) {
      htrip_.resize(base + L_.A.nonZeros());
      for (int i = 0; i < L_.n; ++i) htrip_.emplace_back(i, i, delta_);
      for (int i = 0; i < L_.p; ++i)
        htrip_.emplace_back(L_.n + i, L_.n + i, -delta_);
      SpMat K(L_.n + L_.p, L_.n + L_.p);
      K.setFromTriplets(htrip_.begin(), htrip_.end());
      if (!pattern_ready_) {
        sldlt_.analyzePattern(K);
        pattern_ready_ = true;
      }
      sldlt_.factorize(K);
      if (sldlt_.info() == Eigen::Success) return true;
      delta_ *= 100.0;
    }
    return false;
  }

  void assemble_H(const Scaling& W) {
    H_.setZero();
    assemble_H_entries(W, [&](int i, int j, double v) {
      H_(i, j) += v;
      if (i != j) H_(j, i) += v;
    });
  }

  // emits the lower-triangle contributions (i >= j) of H = G'(W'W)^{-1}G
  template <class AddFn>
  void assemble_H_entries(const Scaling& W, AddFn&& add) {
    if (rowmap_.empty()) build_rowmap();
    auto emit = [&](int va, int vb, double v) {
      if (va >= vb)
        add(va, vb, v);
      else
        add(vb, va, v);
    };
    for (size_t si = 0; si < L_.segs.size(); ++si) {
      const ConeSeg& seg = L_.segs[si];
      if (seg.kind == Cone::NonNeg) {
        for (int r = 0; r < seg.dim; ++r) {
          int row = seg.offset + r;
          double d = 1.0 / (W.nn_w[si][r] * W.nn_w[si][r]);
          const auto& entries = rowmap_[row];
          for (size_t a = 0; a < entries.size(); ++a)
            for (size_t b = a; b < entries.size(); ++b)
              emit(entries[a].first, entries[b].first,
                   d * entries[a].second * entries[b].second);
        }
      } else if (seg.kind == Cone::SecondOrder) {
        int d = seg.dim;
        MatrixXd Dm(d, d);
        for (int j = 0; j < d; ++j) {
          VectorXd ej = VectorXd::Zero(d);
          ej[j] = 1.0;
          auto& [eta, v] = W.soc[si];
          Dm.col(j) =
              ConeOps::soc_apply_inv(eta, v, ConeOps::soc_apply_inv(eta, v, ej));
        }
        const auto& cols = L_.soc_cols[si];
        for (size_t a = 0; a < cols.size(); ++a)
          for (size_t b = a; b < cols.size(); ++b) {
            int va = int(cols[a][1]), vb = int(cols[b][1]);
            double v = cols[a][2] * cols[b][2] *
                       Dm(int(cols[a][0]), int(cols[b][0]));
            if (a != b && va == vb) v *= 2.0;  // both off-diagonal copies
            emit(va, vb, v);
          }
      } else {
        const MatrixXd& Q = W.psd[si].Q;
        const auto& cols = L_.psd_cols[si];
        for (size_t ia = 0; ia < cols.size(); ++ia) {
          for (size_t ib = ia; ib < cols.size(); ++ib) {
            double sum = 0;
            for (const MatEntry& ea : cols[ia].entries)
              for (const MatEntry& eb : cols[ib].entries) {
                double k;
                if (ea.a != ea.b && eb.a != eb.b)
                  k = 2.0 * (Q(ea.a, eb.a) * Q(ea.b, eb.b) +
                             Q(ea.a, eb.b) * Q(ea.b, eb.a));
                else if (ea.a == ea.b && eb.a != eb.b)
                  k = 2.0 * Q(ea.a, eb.a) * Q(ea.a, eb.b);
                else if (ea.a != ea.b && eb.a == eb.b)
                  k = 2.0 * Q(ea.a, eb.a) * Q(ea.b, eb.a);
                else
                  k = Q(ea.a, eb.a) * Q(ea.a, eb.a);
                sum += ea.coef * eb.coef * k;
              }
            emit(cols[ia].var, cols[ib].var, sum);
          }
        }
      }
    }
  }

  void build_rowmap() {
    rowmap_.resize(L_.m);
    for (int k = 0; k < L_.G.outerSize(); ++k)
      for (SpMat::InnerIterator it(L_.G, k); it; ++it)
        rowmap_[it.row()].emplace_back(it.col(), it.value());
  }

  const Layout& L_;
  const ConeOps& ops_;
  bool use_sparse_ = false;
  MatrixXd Ad_, H_;
  Eigen::LLT<MatrixXd> lltH_, lltS_;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower> sldlt_;
  bool pattern_ready_ = false;
  std::vector<Triplet> htrip_;
  double delta_ = 0;
  mutable double achieved_residual_ = 0;
  std::vector<std::vector<std::pair<int, double>>> rowmap_;
};

}  // namespace

SolverResult solve(const ConeProgram& prog, const SolveOptions& opts) {
  auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  SolverResult res;
  Layout L = build_layout(prog);
  if (L.trivial_infeasible) {
    res.status = SolveStatus::Infeasible;
    res.message = "inconsistent constant equality row";
    return res;
  }
  equilibrate(L);
  build_cone_columns(L);

  const int n = L.n, p = L.p, m = L.m;
  ConeOps ops(L);

  // pure linear feasibility/objective with no cone rows: solve directly
  if (m == 0 && p == 0) {
    res.status = (L.c.squaredNorm() == 0) ? SolveStatus::Optimal
                                          : SolveStatus::Unbounded;
    res.x = VectorXd::Zero(n).cwiseProduct(L.col_scale);
    res.objective = prog.objective().constant;
    res.duals = VectorXd::Zero(prog.num_rows());
    res.primal_residual = res.dual_residual = res.relative_gap = 0.0;
    return res;
  }

  VectorXd x = VectorXd::Zero(n), y = VectorXd::Zero(p);
  VectorXd s = ops.identity(), z = ops.identity();
  double tau = 1.0, kappa = 1.0;
  const double nu = L.barrier_degree + 1.0;

  Scaling W;
  KktSolver kkt(L, ops);
  const double delta0 = 1e-10;

  double best_err = kInf;
  VectorXd best_x, best_y, best_z, best_s;
  double best_tau = 1.0;
  double best_metrics[3] = {kInf, kInf, kInf};
  int since_best = 0;

  auto record_best = [&](double pres, double dres, double gap) {
    double err = std::max({pres, dres, gap});
    if (err < 0.9 * best_err) {
      since_best = 0;
    } else {
      ++since_best;
    }
    if (err < best_err) {
      best_err = err;
      best_x = x;
      best_y = y;
      best_z = z;
      best_s = s;
      best_tau = tau;
      best_metrics[0] = pres;
      best_metrics[1] = dres;
      best_metrics[2] = gap;
    }
  };
  auto restore_best_metrics = [&] {
    res.primal_residual = best_metrics[0];
    res.dual_residual = best_metrics[1];
    res.relative_gap = best_metrics[2];
  };

  auto finalize_point = [&](SolveStatus st, const VectorXd& fx,
                            const VectorXd& fy, const VectorXd& fz,
                            double ftau) {
    res.status = st;
    res.x = fx.cwiseProduct(L.col_scale) / ftau;
    res.duals = VectorXd::Zero(prog.num_rows());
    // sign convention: stationarity reads  c == sum_r duals[r] * row_r,
    // with cone-row duals in the dual cone and equality duals free
    double zu = 1.0 / (L.cost_scale * ftau);
    for (int i = 0; i < p; ++i)
      res.duals[L.prog_row_of_eq[i]] = -fy[i] * L.eq_row_scale[i] * zu;
    for (int i = 0; i < m; ++i)
      res.duals[L.prog_row_of_cone[i]] = fz[i] * L.cone_row_scale[i] * zu;
    std::vector<double> xs(res.x.data(), res.x.data() + res.x.size());
    res.objective = prog.objective_value(xs);
    if (st == SolveStatus::NumericalFailure) res.x.resize(0);
  };

  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    // residuals
    VectorXd rx = L.G.transpose() * z + L.c * tau;
    if (p) rx += L.A.transpose() * y;
    VectorXd ry = p ? VectorXd(L.b * tau - L.A * x) : VectorXd();
    VectorXd rz = L.h * tau - L.G * x - s;
    double rtau = -L.c.dot(x) - (p ? L.b.dot(y) : 0.0) - L.h.dot(z) - kappa;

    double mu = (s.dot(z) + tau * kappa) / nu;

    // convergence metrics on the de-homogenized point
    double pobj = L.c.dot(x) / tau;
    double dobj = -((p ? L.b.dot(y) : 0.0) + L.h.dot(z)) / tau;
    double pres = 0.0;
    if (p) pres = (L.A * x / tau - L.b).lpNorm<Eigen::Infinity>() /
                  (1.0 + L.b.lpNorm<Eigen::Infinity>());
    if (m) {
      double pres2 = (L.G * x / tau + s / tau - L.h).lpNorm<Eigen::Infinity>() /
                     (1.0 + L.h.lpNorm<Eigen::Infinity>());
      pres = std::max(pres, pres2);
    }
    double dres = rx.lpNorm<Eigen::Infinity>() / tau /
                  (1.0 + L.c.lpNorm<Eigen::Infinity>());
    double gap = std::abs(pobj - dobj) / std::max({1.0, std::abs(pobj), std::abs(dobj)});

    // a grossly regressed iterate signals that the Newton systems have hit
    // their numerical floor: stop on the best iterate instead
    if (iter > 0 && best_err < 1e-5 &&
        std::max(pres, dres) > 1e3 * std::max(best_err, opts.tolerance)) {
      finalize_point(best_err <= opts.tolerance ? SolveStatus::Optimal
                                                : SolveStatus::IterLimit,
                     best_x, best_y, best_z, best_tau);
      restore_best_metrics();
      res.message = "numerical floor reached at residual " +
                    std::to_string(best_err);
      break;
    }

    record_best(pres, dres, gap);
    res.primal_residual = pres;
    res.dual_residual = dres;
    res.relative_gap = gap;

    if (opts.verbose) {
      fprintf(stderr, "it %3d  pobj %+.8e  gap %.2e  pres %.2e  dres %.2e  mu %.2e  tau %.2e\n",
              iter, pobj / L.cost_scale, gap, pres, dres, mu, tau);
    }

    if (pres <= opts.tolerance && dres <= opts.tolerance &&
        gap <= opts.tolerance) {
      finalize_point(SolveStatus::Optimal, x, y, z, tau);
      break;
    }

    // numerical floor: endgame stopped progressing, return the best iterate
    if (since_best >= 8 && mu < 1e-6) {
      finalize_point(best_err <= opts.tolerance ? SolveStatus::Optimal
                                                : SolveStatus::IterLimit,
                     best_x, best_y, best_z, best_tau);
      restore_best_metrics();
      res.message = "stalled at residual " + std::to_string(best_err);
      break;
    }

    // infeasibility certificates
    double by_hz = (p ? L.b.dot(y) : 0.0) + L.h.dot(z);
    if (by_hz < -1e-12) {
      VectorXd dualres = L.G.transpose() * z;
      if (p) dualres += L.A.transpose() * y;
      if (dualres.lpNorm<Eigen::Infinity>() <= opts.tolerance * (-by_hz)) {
        res.status = SolveStatus::Infeasible;
        res.message = "primal infeasibility certificate found";
        res.x.resize(0);
        res.duals = VectorXd::Zero(prog.num_rows());
        double sc = -1.0 / by_hz;
        for (int i = 0; i < p; ++i)
          res.duals[L.prog_row_of_eq[i]] = y[i] * L.eq_row_scale[i] * sc;
        for (int i = 0; i < m; ++i)
          res.duals[L.prog_row_of_cone[i]] = z[i] * L.cone_row_scale[i] * sc;
        break;
      }
    }
    double cx = L.c.dot(x);
    if (cx < -1e-12) {
      double pr1 = p ? (L.A * x).lpNorm<Eigen::Infinity>() : 0.0;
      double pr2 = m ? (L.G * x + s).lpNorm<Eigen::Infinity>() : 0.0;
      if (std::max(pr1, pr2) <= opts.tolerance * (-cx)) {
        res.status = SolveStatus::Unbounded;
        res.message = "dual infeasibility certificate found";
        res.x.resize(0);
        res.duals = VectorXd::Zero(prog.num_rows());
        break;
      }
    }

    if (elapsed() > opts.time_limit_seconds) {
      finalize_point(SolveStatus::IterLimit, best_x, best_y, best_z, best_tau);
      restore_best_metrics();
      res.message = "time limit reached";
      break;
    }

    auto finalize_best = [&](const char* why) {
      SolveStatus st = best_err <= opts.tolerance ? SolveStatus::Optimal
                       : best_err <= 1e-4         ? SolveStatus::IterLimit
                                                  : SolveStatus::NumericalFailure;
      finalize_point(st, best_x, best_y, best_z, best_tau);
      restore_best_metrics();
      res.message = std::string(why) + "; best residual " +
                    std::to_string(best_err);
    };

    if (!ops.update(s, z, W)) {
      finalize_best("lost cone interiority");
      break;
    }
    if (!kkt.factor(W, delta0 * (1.0 + mu))) {
      finalize_best("KKT factorization failed");
      break;
    }

    // common second solve: K D2 = (-c, b, h)
    VectorXd dx2, dy2, dz2;
    kkt.solve3(W, -L.c, p ? VectorXd(L.b) : VectorXd(), L.h, dx2, dy2, dz2);

    auto direction = [&](double eta, const VectorXd& ds_rhs, double dk_rhs,
                         VectorXd& dx, VectorXd& dy, VectorXd& dz,
                         VectorXd& ds, double& dtau, double& dkappa) {
      VectorXd rho = ops.jdiv_lambda(W, ds_rhs);
      VectorXd w1 = eta * rz - ops.apply_Wt(W, rho);
      VectorXd dx1, dy1, dz1;
      kkt.solve3(W, -eta * rx, p ? VectorXd(eta * ry) : VectorXd(), w1, dx1,
                 dy1, dz1);
      double P1 = L.c.dot(dx1) + (p ? L.b.dot(dy1) : 0.0) + L.h.dot(dz1);
      double P2 = L.c.dot(dx2) + (p ? L.b.dot(dy2) : 0.0) + L.h.dot(dz2);
      double den = kappa / tau - P2;
      dtau = (std::abs(den) > 1e-300)
                 ? (-eta * rtau + dk_rhs / tau + P1) / den
                 : 0.0;
      dx = dx1 + dtau * dx2;
      if (p) dy = dy1 + dtau * dy2;
      dz = dz1 + dtau * dz2;
      ds = ops.apply_Wt(W, VectorXd(rho - ops.apply_W(W, dz)));
      dkappa = (dk_rhs - kappa * dtau) / tau;
    };

    // affine direction: ds_rhs = -lambda o lambda, dk = -tau kappa
    VectorXd lam2 = ops.jprod(W.lambda, W.lambda);
    VectorXd dxa, dya, dza, dsa;
    double dtaua, dkappaa;
    direction(1.0, -lam2, -tau * kappa, dxa, dya, dza, dsa, dtaua, dkappaa);

    double amax = std::min(ops.max_step(s, dsa), ops.max_step(z, dza));
    if (dtaua < 0) amax = std::min(amax, -tau / dtaua);
    if (dkappaa < 0) amax = std::min(amax, -kappa / dkappaa);
    double a_aff = std::min(1.0, amax);
    double mu_aff =
        ((s + a_aff * dsa).dot(z + a_aff * dza) +
         (tau + a_aff * dtaua) * (kappa + a_aff * dkappaa)) / nu;
    double sigma = std::pow(std::max(0.0, mu_aff / mu), 3.0);
    sigma = std::min(sigma, 0.999);

    // combined direction with Mehrotra correction
    VectorXd eta_a = ops.apply_Winv_t(W, dsa);
    VectorXd zeta_a = ops.apply_W(W, dza);
    VectorXd corr = ops.jprod(eta_a, zeta_a);
    VectorXd ds_rhs = -lam2 - corr + sigma * mu * ops.identity();
    double dk_rhs = -tau * kappa - dtaua * dkappaa + sigma * mu;

    VectorXd dx, dy, dz, ds;
    double dtau, dkappa;
    direction(1.0 - sigma, ds_rhs, dk_rhs, dx, dy, dz, ds, dtau, dkappa);

    double step_max = std::min(ops.max_step(s, ds), ops.max_step(z, dz));
    if (dtau < 0) step_max = std::min(step_max, -tau / dtau);
    if (dkappa < 0) step_max = std::min(step_max, -kappa / dkappa);
    double ftb = mu < 1e-6 ? 0.999 : 0.99;
    double alpha = std::min(1.0, ftb * step_max);

    // keep strict interiority even under roundoff
    int backoffs = 0;
    while (backoffs < 30) {
      VectorXd s_try = s + alpha * ds;
      VectorXd z_try = z + alpha * dz;
      if (ops.min_margin(s_try) > 0 && ops.min_margin(z_try) > 0 &&
          tau + alpha * dtau > 0 && kappa + alpha * dkappa > 0)
        break;
      alpha *= 0.8;
      ++backoffs;
    }
    if (backoffs == 30 || alpha < 1e-13) {
      finalize_best("step length collapsed");
      break;
    }

    x += alpha * dx;
    if (p) y += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;
    tau += alpha * dtau;
    kappa += alpha * dkappa;
  }

  if (iter == opts.max_iterations) {
    finalize_point(best_err <= opts.tolerance ? SolveStatus::Optimal
                                              : SolveStatus::IterLimit,
                   best_x, best_y, best_z, best_tau);
    restore_best_metrics();
    res.message = "iteration limit reached";
  }

  res.iterations = iter;
  res.solve_time = elapsed();
  return res;
}

}  // namespace orpd
