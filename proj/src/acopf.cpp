//
//  acopf.cpp
//
//  Primal-dual interior-point method on the rectangular-coordinate
//  formulation: variables (e, f, pG, qG), power-balance equalities with
//  flows eliminated, box/voltage/thermal inequalities with slacks.
//

#include "orpd/acopf.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <queue>

namespace orpd {

const char* to_string(LocalStatus s) {
  switch (s) {
    case LocalStatus::LocalOptimal: return "LocalOptimal";
    case LocalStatus::FeasibleOnly: return "FeasibleOnly";
    case LocalStatus::Infeasible: return "Infeasible";
    case LocalStatus::Diverged: return "Diverged";
  }
  return "?";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using cx = std::complex<double>;

double tap_of(const DiscreteAssignment& asg, const Branch& br) {
  if (!br.is_tap()) return 1.0;
  auto it = asg.t_round.find(br.id);
  return it == asg.t_round.end() ? 1.0 : it->second;
}

double shunt_scale(const DiscreteAssignment& asg, size_t shunt_idx) {
  return shunt_idx < asg.u_round.size() ? asg.u_round[shunt_idx] : 1.0;
}

}  // namespace

std::vector<double> residuals(const Network& net, const DiscreteAssignment& asg,
                              const OperatingPoint& point) {
  const int n = net.bus_count();
  std::vector<double> out;
  std::vector<double> pinj(n, 0), qinj(n, 0);
  for (const Branch& br : net.branches) {
    auto [sf, st] = branch_flow(br, point.v[br.from_bus], point.v[br.to_bus],
                                tap_of(asg, br));
    pinj[br.from_bus] += sf.real();
    qinj[br.from_bus] += sf.imag();
    pinj[br.to_bus] += st.real();
    qinj[br.to_bus] += st.imag();
  }
  std::vector<double> pg_at(n, 0), qg_at(n, 0);
  for (const Generator& g : net.generators) {
    pg_at[g.bus] += point.p_gen[g.id];
    qg_at[g.bus] += point.q_gen[g.id];
  }
  for (int k = 0; k < n; ++k) {
    double gsh = 0, bsh = 0;
    int si = net.shunt_index(k);
    if (si >= 0) {
      double u = shunt_scale(asg, si);
      gsh = u * net.shunts[si].g_shunt;
      bsh = u * net.shunts[si].b_shunt;
    }
    double vm2 = std::norm(point.v[k]);
    out.push_back(pg_at[k] - net.buses[k].p_demand - gsh * vm2 - pinj[k]);
  }
  for (int k = 0; k < n; ++k) {
    double bsh = 0;
    int si = net.shunt_index(k);
    if (si >= 0) bsh = shunt_scale(asg, si) * net.shunts[si].b_shunt;
    double vm2 = std::norm(point.v[k]);
    out.push_back(qg_at[k] - net.buses[k].q_demand + bsh * vm2 - qinj[k]);
  }
  out.push_back(point.v[net.reference_bus].imag());
  for (int k = 0; k < n; ++k)
    out.push_back(std::max(0.0, net.buses[k].v_min - std::abs(point.v[k])));
  for (int k = 0; k < n; ++k)
    out.push_back(std::max(0.0, std::abs(point.v[k]) - net.buses[k].v_max));
  for (const Generator& g : net.generators) {
    out.push_back(std::max(0.0, g.p_min - point.p_gen[g.id]));
    out.push_back(std::max(0.0, point.p_gen[g.id] - g.p_max));
    out.push_back(std::max(0.0, g.q_min - point.q_gen[g.id]));
    out.push_back(std::max(0.0, point.q_gen[g.id] - g.q_max));
  }
  for (const Branch& br : net.branches) {
    if (!br.thermal_limit) continue;
    auto [sf, st] = branch_flow(br, point.v[br.from_bus], point.v[br.to_bus],
                                tap_of(asg, br));
    out.push_back(std::max(0.0, std::abs(sf) - *br.thermal_limit));
    out.push_back(std::max(0.0, std::abs(st) - *br.thermal_limit));
  }
  return out;
}

double residual_norm(const Network& net, const DiscreteAssignment& asg,
                     const OperatingPoint& point) {
  double worst = 0;
  for (double r : residuals(net, asg, point))
    worst = std::max(worst, std::abs(r));
  return worst;
}

namespace {

// Quadratic form q(x) = x' Q x over the four end variables of a branch
// (ek, fk, em, fm); coefficients depend on the fixed tap ratio.
struct FlowQuad {
  int idx[4];        // variable indices of ek, fk, em, fm
  double Q[4][4];    // symmetric

  double value(const VectorXd& x) const {
    double s = 0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) s += Q[i][j] * x[idx[i]] * x[idx[j]];
    return s;
  }
  void add_gradient(const VectorXd& x, VectorXd& g, double w) const {
    for (int i = 0; i < 4; ++i) {
      double gi = 0;
      for (int j = 0; j < 4; ++j) gi += Q[i][j] * x[idx[j]];
      g[idx[i]] += 2.0 * w * gi;
    }
  }
  void add_hessian(MatrixXd& H, double w) const {
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) H(idx[i], idx[j]) += 2.0 * w * Q[i][j];
  }
  void gradient_only(const VectorXd& x, VectorXd& g) const {
    g.setZero();
    add_gradient(x, g, 0.5);
  }
};

// builds the four per-branch quadratic forms for fixed tap ratio t
void branch_quads(const Branch& br, int n, double t, FlowQuad& pf, FlowQuad& qf,
                  FlowQuad& pt, FlowQuad& qt) {
  const double g = br.series_admittance.real();
  const double b = br.series_admittance.imag();
  const double bc = br.shunt_susceptance_total / 2.0;
  const double a = 1.0 / t;
  int ek = br.from_bus, fk = n + br.from_bus;
  int em = br.to_bus, fm = n + br.to_bus;
  for (FlowQuad* q : {&pf, &qf, &pt, &qt}) {
    q->idx[0] = ek;
    q->idx[1] = fk;
    q->idx[2] = em;
    q->idx[3] = fm;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) q->Q[i][j] = 0;
  }
  auto sym = [](FlowQuad& q, int i, int j, double v) {
    q.Q[i][j] += v / 2;
    q.Q[j][i] += v / 2;
  };
  // p_f = g a^2 (ek^2 + fk^2) - a [g (ek em + fk fm) + b (fk em - ek fm)]
  pf.Q[0][0] += g * a * a;
  pf.Q[1][1] += g * a * a;
  sym(pf, 0, 2, -a * g);
  sym(pf, 1, 3, -a * g);
  sym(pf, 1, 2, -a * b);
  sym(pf, 0, 3, a * b);
  // q_f = -(b + bc) a^2 (ek^2 + fk^2) - a [g (fk em - ek fm) - b (ek em + fk fm)]
  qf.Q[0][0] += -(b + bc) * a * a;
  qf.Q[1][1] += -(b + bc) * a * a;
  sym(qf, 1, 2, -a * g);
  sym(qf, 0, 3, a * g);
  sym(qf, 0, 2, a * b);
  sym(qf, 1, 3, a * b);
  // p_t = g (em^2 + fm^2) - a [g (ek em + fk fm) - b (fk em - ek fm)]
  pt.Q[2][2] += g;
  pt.Q[3][3] += g;
  sym(pt, 0, 2, -a * g);
  sym(pt, 1, 3, -a * g);
  sym(pt, 1, 2, a * b);
  sym(pt, 0, 3, -a * b);
  // q_t = -(b + bc) (em^2 + fm^2) + a [g (fk em - ek fm) + b (ek em + fk fm)]
  qt.Q[2][2] += -(b + bc);
  qt.Q[3][3] += -(b + bc);
  sym(qt, 1, 2, a * g);
  sym(qt, 0, 3, -a * g);
  sym(qt, 0, 2, a * b);
  sym(qt, 1, 3, a * b);
}

struct Nlp {
  const Network& net;
  const DiscreteAssignment& asg;
  Objective objective;
  int n, ng, nx;

  std::vector<FlowQuad> pf, qf, pt, qt;
  std::vector<double> gsh, bsh;  // fixed shunt admittance per bus

  explicit Nlp(const Network& net_, const DiscreteAssignment& asg_,
               Objective obj)
      : net(net_), asg(asg_), objective(obj) {
    n = net.bus_count();
    ng = static_cast<int>(net.generators.size());
    nx = 2 * n + 2 * ng;
    pf.resize(net.branches.size());
    qf.resize(net.branches.size());
    pt.resize(net.branches.size());
    qt.resize(net.branches.size());
    for (const Branch& br : net.branches)
      branch_quads(br, n, tap_of(asg, br), pf[br.id], qf[br.id], pt[br.id],
                   qt[br.id]);
    gsh.assign(n, 0);
    bsh.assign(n, 0);
    for (size_t i = 0; i < net.shunts.size(); ++i) {
      double u = shunt_scale(asg, i);
      gsh[net.shunts[i].bus] = u * net.shunts[i].g_shunt;
      bsh[net.shunts[i].bus] = u * net.shunts[i].b_shunt;
    }
  }

  int pg_var(int g) const { return 2 * n + g; }
  int qg_var(int g) const { return 2 * n + ng + g; }

  int num_eq() const { return 2 * n + 1; }
  int num_ineq() const {
    int t = 0;
    for (const Branch& br : net.branches)
      if (br.thermal_limit) t += 2;
    return 2 * n + 4 * ng + t;
  }

  double obj_value(const VectorXd& x) const {
    double f = 0;
    for (const Generator& g : net.generators) {
      double p = x[pg_var(g.id)];
      if (objective == Objective::Cost)
        f += g.cost_c2 * p * p + g.cost_c1 * p + g.cost_c0;
      else
        f += net.base_mva * p;
    }
    return f;
  }
  void obj_grad(const VectorXd& x, VectorXd& g) const {
    g.setZero(nx);
    for (const Generator& gen : net.generators) {
      double p = x[pg_var(gen.id)];
      g[pg_var(gen.id)] = objective == Objective::Cost
                              ? 2 * gen.cost_c2 * p + gen.cost_c1
                              : net.base_mva;
    }
  }

  // equality values g(x) and Jacobian; rows: P balance, Q balance, ref f
  void eq_eval(const VectorXd& x, VectorXd& val, MatrixXd& J) const {
    val.setZero(num_eq());
    J.setZero(num_eq(), nx);
    for (const Generator& g : net.generators) {
      val[g.bus] += x[pg_var(g.id)];
      J(g.bus, pg_var(g.id)) += 1;
      val[n + g.bus] += x[qg_var(g.id)];
      J(n + g.bus, qg_var(g.id)) += 1;
    }
    for (int k = 0; k < n; ++k) {
      double e = x[k], f = x[n + k], vm2 = e * e + f * f;
      val[k] -= net.buses[k].p_demand + gsh[k] * vm2;
      val[n + k] -= net.buses[k].q_demand - bsh[k] * vm2;
      if (gsh[k] != 0) {
        J(k, k) -= 2 * gsh[k] * e;
        J(k, n + k) -= 2 * gsh[k] * f;
      }
      if (bsh[k] != 0) {
        J(n + k, k) += 2 * bsh[k] * e;
        J(n + k, n + k) += 2 * bsh[k] * f;
      }
    }
    VectorXd grad(nx);
    for (const Branch& br : net.branches) {
      int k = br.from_bus, m = br.to_bus;
      val[k] -= pf[br.id].value(x);
      val[n + k] -= qf[br.id].value(x);
      val[m] -= pt[br.id].value(x);
      val[n + m] -= qt[br.id].value(x);
      // Jacobian stamps: d(quad)/dx = 2 Q x restricted to 4 vars
      auto stamp = [&](const FlowQuad& q, int row) {
        for (int i = 0; i < 4; ++i) {
          double gi = 0;
          for (int j = 0; j < 4; ++j) gi += q.Q[i][j] * x[q.idx[j]];
          J(row, q.idx[i]) -= 2.0 * gi;
        }
      };
      stamp(pf[br.id], k);
      stamp(qf[br.id], n + k);
      stamp(pt[br.id], m);
      stamp(qt[br.id], n + m);
    }
    val[2 * n] = x[n + net.reference_bus];
    J(2 * n, n + net.reference_bus) = 1;
  }

  // inequalities h(x) <= 0, Jacobian
  void ineq_eval(const VectorXd& x, VectorXd& val, MatrixXd& J) const {
    int mi = num_ineq();
    val.setZero(mi);
    J.setZero(mi, nx);
    int r = 0;
    for (int k = 0; k < n; ++k, ++r) {
      double e = x[k], f = x[n + k];
      val[r] = net.buses[k].v_min * net.buses[k].v_min - e * e - f * f;
      J(r, k) = -2 * e;
      J(r, n + k) = -2 * f;
    }
    for (int k = 0; k < n; ++k, ++r) {
      double e = x[k], f = x[n + k];
      val[r] = e * e + f * f - net.buses[k].v_max * net.buses[k].v_max;
      J(r, k) = 2 * e;
      J(r, n + k) = 2 * f;
    }
    for (const Generator& g : net.generators) {
      val[r] = g.p_min - x[pg_var(g.id)];
      J(r++, pg_var(g.id)) = -1;
      val[r] = x[pg_var(g.id)] - g.p_max;
      J(r++, pg_var(g.id)) = 1;
      val[r] = g.q_min - x[qg_var(g.id)];
      J(r++, qg_var(g.id)) = -1;
      val[r] = x[qg_var(g.id)] - g.q_max;
      J(r++, qg_var(g.id)) = 1;
    }
    for (const Branch& br : net.branches) {
      if (!br.thermal_limit) continue;
      double lim = *br.thermal_limit;
      auto cone = [&](const FlowQuad& qp, const FlowQuad& qq, int row) {
        double p = qp.value(x), q = qq.value(x);
        val[row] = p * p + q * q - lim * lim;
        for (int i = 0; i < 4; ++i) {
          double gp = 0, gq = 0;
          for (int j = 0; j < 4; ++j) {
            gp += qp.Q[i][j] * x[qp.idx[j]];
            gq += qq.Q[i][j] * x[qq.idx[j]];
          }
          J(row, qp.idx[i]) += 4.0 * (p * gp + q * gq);
        }
      };
      cone(pf[br.id], qf[br.id], r++);
      cone(pt[br.id], qt[br.id], r++);
    }
  }

  // Hessian of the Lagrangian: objective + lambda'g + mu'h
  void lagrangian_hessian(const VectorXd& x, const VectorXd& lambda,
                          const VectorXd& mu, MatrixXd& H) const {
    H.setZero(nx, nx);
    if (objective == Objective::Cost)
      for (const Generator& g : net.generators)
        H(pg_var(g.id), pg_var(g.id)) += 2 * g.cost_c2;

    for (int k = 0; k < n; ++k) {
      if (gsh[k] != 0) {
        H(k, k) -= 2 * gsh[k] * lambda[k];
        H(n + k, n + k) -= 2 * gsh[k] * lambda[k];
      }
      if (bsh[k] != 0) {
        H(k, k) += 2 * bsh[k] * lambda[n + k];
        H(n + k, n + k) += 2 * bsh[k] * lambda[n + k];
      }
    }
    for (const Branch& br : net.branches) {
      int k = br.from_bus, m = br.to_bus;
      pf[br.id].add_hessian(H, -lambda[k]);
      qf[br.id].add_hessian(H, -lambda[n + k]);
      pt[br.id].add_hessian(H, -lambda[m]);
      qt[br.id].add_hessian(H, -lambda[n + m]);
    }
    // voltage magnitude rows
    int r = 0;
    for (int k = 0; k < n; ++k, ++r) {
      H(k, k) += -2 * mu[r];
      H(n + k, n + k) += -2 * mu[r];
    }
    for (int k = 0; k < n; ++k, ++r) {
      H(k, k) += 2 * mu[r];
      H(n + k, n + k) += 2 * mu[r];
    }
    r += 4 * ng;  // box rows are linear
    for (const Branch& br : net.branches) {
      if (!br.thermal_limit) continue;
      auto cone_h = [&](const FlowQuad& qp, const FlowQuad& qq, double w) {
        if (w == 0) return;
        double p = qp.value(x), q = qq.value(x);
        // H(p^2+q^2) = 2 grad_p grad_p' + 2 p Hp + same for q
        double gp[4], gq[4];
        for (int i = 0; i < 4; ++i) {
          gp[i] = 0;
          gq[i] = 0;
          for (int j = 0; j < 4; ++j) {
            gp[i] += 2 * qp.Q[i][j] * x[qp.idx[j]];
            gq[i] += 2 * qq.Q[i][j] * x[qq.idx[j]];
          }
        }
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j)
            H(qp.idx[i], qp.idx[j]) +=
                w * (2 * gp[i] * gp[j] + 2 * gq[i] * gq[j] +
                     2 * p * 2 * qp.Q[i][j] + 2 * q * 2 * qq.Q[i][j]);
      };
      cone_h(pf[br.id], qf[br.id], mu[r]);
      ++r;
      cone_h(pt[br.id], qt[br.id], mu[r]);
      ++r;
    }
  }
};

OperatingPoint to_point(const Nlp& nlp, const VectorXd& x) {
  OperatingPoint pt;
  pt.v.resize(nlp.n);
  pt.p_gen.resize(nlp.ng);
  pt.q_gen.resize(nlp.ng);
  for (int k = 0; k < nlp.n; ++k) pt.v[k] = cx(x[k], x[nlp.n + k]);
  for (int g = 0; g < nlp.ng; ++g) {
    pt.p_gen[g] = x[nlp.pg_var(g)];
    pt.q_gen[g] = x[nlp.qg_var(g)];
  }
  return pt;
}

LocalSolveResult run_ipm(const Nlp& nlp, VectorXd x,
                         const LocalSolveOptions& opts) {
  auto t0 = std::chrono::steady_clock::now();
  const int nx = nlp.nx, me = nlp.num_eq(), mi = nlp.num_ineq();
  const double xi_ftb = 0.99995;

  VectorXd gval(me), hval(mi), lambda = VectorXd::Zero(me);
  MatrixXd Jg(me, nx), Jh(mi, nx);
  nlp.eq_eval(x, gval, Jg);
  nlp.ineq_eval(x, hval, Jh);
  VectorXd z(mi), mu(mi);
  for (int i = 0; i < mi; ++i) z[i] = std::max(1.0, -hval[i]);
  double gamma0 = 1.0;
  for (int i = 0; i < mi; ++i) mu[i] = gamma0 / z[i];

  LocalSolveResult out;
  VectorXd grad(nx);
  MatrixXd H(nx, nx);
  int iter = 0;
  double prev_f = std::numeric_limits<double>::infinity();
  double best_meas = std::numeric_limits<double>::infinity();
  int since_improve = 0;
  auto out_of_time = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
               .count() > opts.time_limit_seconds;
  };
  for (; iter < opts.max_iterations && !out_of_time(); ++iter) {
    nlp.eq_eval(x, gval, Jg);
    nlp.ineq_eval(x, hval, Jh);
    nlp.obj_grad(x, grad);
    VectorXd Lx = grad + Jg.transpose() * lambda + Jh.transpose() * mu;

    double f0 = nlp.obj_value(x);
    double xznorm = std::max(x.lpNorm<Eigen::Infinity>(),
                             z.lpNorm<Eigen::Infinity>());
    double feascond =
        std::max(gval.lpNorm<Eigen::Infinity>(), hval.maxCoeff()) /
        (1.0 + xznorm);
    double gradcond = Lx.lpNorm<Eigen::Infinity>() /
                      (1.0 + std::max(lambda.lpNorm<Eigen::Infinity>(),
                                      mu.lpNorm<Eigen::Infinity>()));
    double compcond = z.dot(mu) / (1.0 + x.lpNorm<Eigen::Infinity>());
    double costcond = std::abs(f0 - prev_f) / (1.0 + std::abs(prev_f));
    prev_f = f0;
    if (opts.verbose)
      fprintf(stderr, "nlp %3d f %.8e feas %.2e grad %.2e comp %.2e gmax %.2e\n",
              iter, f0, feascond, gradcond, compcond,
              gval.lpNorm<Eigen::Infinity>());
    if (feascond < opts.feas_tol && gradcond < opts.opt_tol &&
        compcond < opts.opt_tol && costcond < opts.opt_tol)
      break;

    // degenerate stationarity tails (uniform marginal costs) level off
    // above the target tolerance; once feasible, stop when progress is gone
    double abs_viol =
        std::max(gval.lpNorm<Eigen::Infinity>(), std::max(0.0, hval.maxCoeff()));
    double meas = std::max(gradcond, compcond);
    if (meas < 0.9 * best_meas) {
      best_meas = meas;
      since_improve = 0;
    } else if (abs_viol < 1e-7 && ++since_improve >= 25) {
      break;
    }

    double gamma = 0.1 * z.dot(mu) / mi;

    nlp.lagrangian_hessian(x, lambda, mu, H);
    MatrixXd M = H + Jh.transpose() *
                         (mu.array() / z.array()).matrix().asDiagonal() * Jh;
    VectorXd corr = ((gamma + mu.array() * hval.array()) / z.array()).matrix();
    VectorXd rhs_x = -Lx - Jh.transpose() * corr;

    // indefinite KKT [[M, Jg'], [Jg, 0]] solved as-is; the Lagrangian
    // curvature is genuinely indefinite away from the solution and
    // convexifying it cripples the Newton direction
    const int kdim = nx + me;
    MatrixXd K = MatrixXd::Zero(kdim, kdim);
    K.topLeftCorner(nx, nx) = M;
    K.topRightCorner(nx, me) = Jg.transpose();
    K.bottomLeftCorner(me, nx) = Jg;
    VectorXd rhs(kdim);
    rhs.head(nx) = rhs_x;
    rhs.tail(me) = -gval;
    VectorXd dxl;
    double rho = 0.0;
    for (int tries = 0; tries < 4; ++tries) {
      MatrixXd Kreg = K;
      Kreg.topLeftCorner(nx, nx).diagonal().array() += rho;
      Kreg.bottomRightCorner(me, me).diagonal().array() -= std::max(rho, 1e-12);
      Eigen::PartialPivLU<MatrixXd> lu(Kreg);
      dxl = lu.solve(rhs);
      if (dxl.allFinite() &&
          (Kreg * dxl - rhs).lpNorm<Eigen::Infinity>() <=
              1e-6 * (1.0 + rhs.lpNorm<Eigen::Infinity>()))
        break;
      rho = rho == 0.0 ? 1e-8 : rho * 1e4;
    }
    if (!dxl.allFinite()) {
      out.status = LocalStatus::Diverged;
      break;
    }
    VectorXd dx = dxl.head(nx);
    VectorXd dlam = dxl.tail(me);

    VectorXd dz = -(hval + z) - Jh * dx;
    VectorXd dmu =
        ((gamma - mu.array() * z.array() - mu.array() * dz.array()) /
         z.array())
            .matrix();

    double ap = 1.0, ad = 1.0;
    for (int i = 0; i < mi; ++i) {
      if (dz[i] < 0) ap = std::min(ap, -xi_ftb * z[i] / dz[i]);
      if (dmu[i] < 0) ad = std::min(ad, -xi_ftb * mu[i] / dmu[i]);
    }
    // the balance equations are quadratic: long voltage moves leave the
    // region where the linearization means anything
    double dxn = dx.lpNorm<Eigen::Infinity>();
    if (dxn > 2.0) ap = std::min(ap, 2.0 / dxn);

    // two-criterion search: scaled KKT merit plus a feasibility safeguard
    auto fp_norm = [&](const VectorXd& xt, const VectorXd& zt) {
      VectorXd gv(me), hv(mi);
      MatrixXd Jgt(me, nx), Jht(mi, nx);
      nlp.eq_eval(xt, gv, Jgt);
      nlp.ineq_eval(xt, hv, Jht);
      return std::sqrt(gv.squaredNorm() + (hv + zt).squaredNorm());
    };
    auto kkt_norm = [&](const VectorXd& xt, const VectorXd& zt,
                        const VectorXd& lt, const VectorXd& mt) {
      VectorXd gv(me), hv(mi), gr(nx);
      MatrixXd Jgt(me, nx), Jht(mi, nx);
      nlp.eq_eval(xt, gv, Jgt);
      nlp.ineq_eval(xt, hv, Jht);
      nlp.obj_grad(xt, gr);
      VectorXd lx = gr + Jgt.transpose() * lt + Jht.transpose() * mt;
      double gscale = 1.0 + gr.lpNorm<Eigen::Infinity>();
      double a = lx.squaredNorm() / (gscale * gscale) + gv.squaredNorm() +
                 (hv + zt).squaredNorm() +
                 (mt.array() * zt.array() - gamma).matrix().squaredNorm();
      return std::sqrt(a);
    };
    double phi0 = kkt_norm(x, z, lambda, mu);
    double fp0 = fp_norm(x, z);
    double sp = ap, sd = ad;
    double best_phi = std::numeric_limits<double>::infinity();
    double best_sp = 0, best_sd = 0;
    bool accepted = false;
    for (int bt = 0; bt < 9; ++bt) {
      double phi = kkt_norm(x + sp * dx, z + sp * dz, lambda + sd * dlam,
                            mu + sd * dmu);
      double fp = fp_norm(x + sp * dx, z + sp * dz);
      if (phi < best_phi) {
        best_phi = phi;
        best_sp = sp;
        best_sd = sd;
      }
      if (phi <= (1.0 - 1e-4 * std::min(sp, sd)) * phi0 &&
          fp <= std::max(1.05 * fp0, fp0 + 0.02)) {
        accepted = true;
        break;
      }
      sp *= 0.5;
      sd *= 0.5;
    }
    if (!accepted) {
      sp = best_sp;
      sd = best_sd;
    }
    if (opts.verbose)
      fprintf(stderr, "    rho %.1e sp %.4f sd %.4f |dx| %.2e phi0 %.3e\n",
              rho, sp, sd, dxn, phi0);
    x += sp * dx;
    z += sp * dz;
    lambda += sd * dlam;
    mu += sd * dmu;
    if (!x.allFinite() || !z.allFinite()) {
      out.status = LocalStatus::Diverged;
      break;
    }
  }

  out.iterations = iter;
  out.solve_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  out.point = to_point(nlp, x);
  out.objective = nlp.obj_value(x);

  nlp.eq_eval(x, gval, Jg);
  nlp.ineq_eval(x, hval, Jh);
  nlp.obj_grad(x, grad);
  VectorXd Lx = grad + Jg.transpose() * lambda + Jh.transpose() * mu;
  out.max_violation =
      std::max(gval.lpNorm<Eigen::Infinity>(), std::max(0.0, hval.maxCoeff()));
  out.stationarity = Lx.lpNorm<Eigen::Infinity>() /
                     (1.0 + std::max(lambda.lpNorm<Eigen::Infinity>(),
                                     mu.lpNorm<Eigen::Infinity>()));
  if (out.status == LocalStatus::Diverged && !x.allFinite()) return out;

  if (out.max_violation <= 1e-6 && out.stationarity <= 1e-6 &&
      iter < opts.max_iterations)
    out.status = LocalStatus::LocalOptimal;
  else if (out.max_violation <= 1e-6)
    out.status = LocalStatus::FeasibleOnly;
  else if (iter >= opts.max_iterations)
    out.status = LocalStatus::Infeasible;
  else
    out.status = LocalStatus::Diverged;
  return out;
}

}  // namespace

OperatingPoint warm_start_from(const Network& net,
                               const RelaxationSolution& sol) {
  OperatingPoint pt;
  const int n = net.bus_count();
  pt.v.assign(n, cx(1.0, 0.0));
  pt.p_gen.resize(net.generators.size());
  pt.q_gen.resize(net.generators.size());

  std::vector<double> vm(n, 1.0);
  for (int k = 0; k < n; ++k)
    vm[k] = sol.v_diag.empty() ? 1.0 : std::sqrt(std::max(1e-12, sol.v_diag[k]));

  // angles: least squares over all branch angle differences,
  //   minimize sum_l (theta_k - theta_m - arg(V_km))^2, ref pinned at 0
  std::vector<double> theta(n, 0.0);
  auto angle_km = [&](const Branch& br) -> std::optional<double> {
    // arg(V_km) = theta_k - theta_m, from whichever lift exists
    if (br.is_tap()) {
      auto it = sol.tap.find(br.id);
      if (it == sol.tap.end()) return std::nullopt;
      cx wlm(it->second[2], it->second[3]);
      if (std::abs(wlm) < 1e-10) return 0.0;
      return std::arg(wlm);
    }
    auto key = br.from_bus < br.to_bus
                   ? std::make_pair(br.from_bus, br.to_bus)
                   : std::make_pair(br.to_bus, br.from_bus);
    auto it = sol.v_off.find(key);
    if (it == sol.v_off.end()) return std::nullopt;
    cx vkm = br.from_bus < br.to_bus ? it->second : std::conj(it->second);
    if (std::abs(vkm) < 1e-10) return 0.0;
    return std::arg(vkm);
  };
  {
    Eigen::MatrixXd Lap = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    bool any = false;
    for (const Branch& br : net.branches) {
      auto akm = angle_km(br);
      if (!akm) continue;
      any = true;
      int k = br.from_bus, m = br.to_bus;
      Lap(k, k) += 1;
      Lap(m, m) += 1;
      Lap(k, m) -= 1;
      Lap(m, k) -= 1;
      rhs[k] += *akm;
      rhs[m] -= *akm;
    }
    if (any) {
      int r = net.reference_bus;
      Lap.row(r).setZero();
      Lap.col(r).setZero();
      Lap(r, r) = 1;
      rhs[r] = 0;
      Lap.diagonal().array() += 1e-9;
      Eigen::VectorXd th = Lap.ldlt().solve(rhs);
      for (int k = 0; k < n; ++k) theta[k] = th[k];
    }
  }
  for (int k = 0; k < n; ++k) pt.v[k] = std::polar(vm[k], theta[k]);

  for (const Generator& g : net.generators) {
    double p = sol.pg.empty() ? 0.5 * (g.p_min + g.p_max) : sol.pg[g.id];
    double qv = sol.qg.empty() ? 0.5 * (g.q_min + g.q_max) : sol.qg[g.id];
    pt.p_gen[g.id] = std::min(g.p_max, std::max(g.p_min, p));
    pt.q_gen[g.id] = std::min(g.q_max, std::max(g.q_min, qv));
  }
  return pt;
}

LocalSolveResult solve_subproblem(const Network& net,
                                  const DiscreteAssignment& asg,
                                  const std::optional<OperatingPoint>& warm,
                                  const LocalSolveOptions& opts) {
  Nlp nlp(net, asg, opts.objective);
  auto pack = [&](const OperatingPoint& pt) {
    VectorXd x(nlp.nx);
    for (int k = 0; k < nlp.n; ++k) {
      x[k] = pt.v[k].real();
      x[nlp.n + k] = pt.v[k].imag();
    }
    for (int g = 0; g < nlp.ng; ++g) {
      x[nlp.pg_var(g)] = pt.p_gen[g];
      x[nlp.qg_var(g)] = pt.q_gen[g];
    }
    return x;
  };

  // the stored case profile is a near-feasible power-flow point and makes
  // a reliable restoration start
  OperatingPoint profile;
  profile.v.resize(nlp.n);
  profile.p_gen.resize(nlp.ng);
  profile.q_gen.resize(nlp.ng);
  for (const Bus& b : net.buses) {
    double vm = std::min(b.v_max, std::max(b.v_min, b.vm_init));
    profile.v[b.id] = std::polar(vm, b.va_init);
  }
  for (const Generator& g : net.generators) {
    profile.p_gen[g.id] = std::min(g.p_max, std::max(g.p_min, g.pg_init));
    profile.q_gen[g.id] = std::min(g.q_max, std::max(g.q_min, g.qg_init));
  }

  LocalSolveResult res = run_ipm(nlp, pack(warm ? *warm : profile), opts);
  if (!res.feasible()) {
    LocalSolveResult retry = run_ipm(nlp, pack(profile), opts);
    if (retry.feasible() ||
        (!res.feasible() && retry.max_violation < res.max_violation))
      return retry;
  }
  return res;
}

double upper_bound_select(const std::vector<LocalSolveResult>& results) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : results)
    if (r.feasible()) best = std::min(best, r.objective);
  if (!std::isfinite(best)) throw NoFeasibleUpperBound();
  return best;
}

}  // namespace orpd
