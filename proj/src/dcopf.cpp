#include "gridburden/dcopf.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>

#include <Eigen/Dense>

namespace gridburden {

double QpForm::objective(const Eigen::VectorXd& x) const {
  return x.dot(Q * x) + w.dot(x);
}

Eigen::VectorXd OpfSolution::x() const {
  Eigen::VectorXd out(g.size() + p.size());
  out << g, p;
  return out;
}

QpForm assemble(const Network& network, const Theta& theta, double tau) {
  const int n_bus = network.bus_count();
  const int n_gen = network.generator_count();
  const int n_line = network.line_count();

  if (theta.d.size() != n_bus) {
    throw Error(ErrorKind::DimensionMismatch,
                "demand vector has length " + std::to_string(theta.d.size()) + ", expected " +
                    std::to_string(n_bus));
  }
  if (theta.alpha.size() != n_gen || theta.beta.size() != n_gen) {
    throw Error(ErrorKind::DimensionMismatch, "cost vectors do not match generator count");
  }
  if (!(tau > 0.0)) throw Error(ErrorKind::InvalidInput, "tau must be > 0");
  if ((theta.d.array() < 0.0).any()) {
    throw Error(ErrorKind::InvalidInput, "demand must be nonnegative");
  }

  QpForm qp;
  qp.num_buses = n_bus;
  qp.num_gens = n_gen;
  qp.num_lines = n_line;
  qp.tau = tau;
  qp.ptdf = ptdf(network);
  qp.gen_incidence = generator_incidence(network);

  const int n = n_gen + n_line;

  qp.Q = Eigen::MatrixXd::Zero(n, n);
  qp.Q.topLeftCorner(n_gen, n_gen) = theta.alpha.asDiagonal();
  qp.Q.bottomRightCorner(n_line, n_line) =
      tau * Eigen::MatrixXd::Identity(n_line, n_line);

  qp.w = Eigen::VectorXd::Zero(n);
  qp.w.head(n_gen) = theta.beta;

  qp.A = Eigen::MatrixXd::Zero(n_line + 1, n);
  qp.A.topLeftCorner(n_line, n_gen) = qp.ptdf * qp.gen_incidence;
  qp.A.topRightCorner(n_line, n_line) = -Eigen::MatrixXd::Identity(n_line, n_line);
  qp.A.bottomLeftCorner(1, n_gen) =
      Eigen::RowVectorXd::Ones(n_bus) * qp.gen_incidence;

  qp.y = Eigen::VectorXd::Zero(n_line + 1);
  qp.y.head(n_line) = qp.ptdf * theta.d;
  qp.y(n_line) = theta.d.sum();

  qp.G = Eigen::MatrixXd::Zero(2 * n, n);
  qp.G.topLeftCorner(n_gen, n_gen) = -Eigen::MatrixXd::Identity(n_gen, n_gen);
  qp.G.block(n_gen, 0, n_gen, n_gen) = Eigen::MatrixXd::Identity(n_gen, n_gen);
  qp.G.block(2 * n_gen, n_gen, n_line, n_line) =
      -Eigen::MatrixXd::Identity(n_line, n_line);
  qp.G.bottomRightCorner(n_line, n_line) = Eigen::MatrixXd::Identity(n_line, n_line);

  qp.h = Eigen::VectorXd::Zero(2 * n);
  for (int j = 0; j < n_gen; ++j) qp.h(n_gen + j) = network.generators[j].g_max;
  for (int k = 0; k < n_line; ++k) {
    qp.h(2 * n_gen + k) = network.lines[k].flow_limit;
    qp.h(2 * n_gen + n_line + k) = network.lines[k].flow_limit;
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(qp.A);
  if (lu.rank() < qp.num_eq()) {
    throw Error(ErrorKind::RankDeficientEquality,
                "equality constraint matrix has rank " + std::to_string(lu.rank()) +
                    " < " + std::to_string(qp.num_eq()));
  }

  return qp;
}

Eigen::VectorXd kkt_vector(const QpForm& qp, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& mu, const Eigen::VectorXd& nu) {
  if (x.size() != qp.num_vars() || mu.size() != qp.num_ineq() || nu.size() != qp.num_eq()) {
    throw Error(ErrorKind::DimensionMismatch, "kkt_vector: candidate sizes do not match QP");
  }
  Eigen::VectorXd k(qp.num_vars() + qp.num_ineq() + qp.num_eq());
  k.head(qp.num_vars()) =
      2.0 * (qp.Q * x) + qp.w + qp.G.transpose() * mu + qp.A.transpose() * nu;
  k.segment(qp.num_vars(), qp.num_ineq()) = mu.cwiseProduct(qp.G * x - qp.h);
  k.tail(qp.num_eq()) = qp.A * x - qp.y;
  return k;
}

double kkt_residual(const QpForm& qp, const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                    const Eigen::VectorXd& nu) {
  return kkt_vector(qp, x, mu, nu).lpNorm<Eigen::Infinity>();
}

namespace {

struct IpProblem {
  Eigen::MatrixXd H;  // cost Hessian (2Q for the OPF)
  Eigen::VectorXd w;
  Eigen::MatrixXd A;
  Eigen::VectorXd y;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
};

struct IpResult {
  Eigen::VectorXd x, mu, nu;
  bool converged = false;
  int iterations = 0;
};

// Mehrotra predictor-corrector on
//   min 1/2 x'Hx + w'x  s.t.  Ax = y,  Gx + s = h,  s >= 0, mu >= 0.
// The Newton system is reduced to the (x, nu) saddle problem with
// Hd = H + G' diag(mu/s) G, then to the SPD Schur complement A Hd^-1 A'.
IpResult ip_solve(const IpProblem& pr, int max_iter) {
  const int me = static_cast<int>(pr.A.rows());
  const int mi = static_cast<int>(pr.G.rows());

  IpResult res;
  res.nu = Eigen::VectorXd::Zero(me);

  // Minimum-norm point satisfying the equalities.
  {
    Eigen::MatrixXd aat = pr.A * pr.A.transpose();
    res.x = pr.A.transpose() * aat.ldlt().solve(pr.y);
  }
  Eigen::VectorXd s = (pr.h - pr.G * res.x).cwiseMax(1.0);
  res.mu = Eigen::VectorXd::Ones(mi);

  const double scale_w = 1.0 + pr.w.lpNorm<Eigen::Infinity>();
  const double scale_y = 1.0 + pr.y.lpNorm<Eigen::Infinity>();
  const double scale_h = 1.0 + pr.h.lpNorm<Eigen::Infinity>();

  for (int iter = 0; iter < max_iter; ++iter) {
    res.iterations = iter;
    const Eigen::VectorXd r_dual =
        pr.H * res.x + pr.w + pr.G.transpose() * res.mu + pr.A.transpose() * res.nu;
    const Eigen::VectorXd r_eq = pr.A * res.x - pr.y;
    const Eigen::VectorXd r_ineq = pr.G * res.x + s - pr.h;
    const Eigen::VectorXd comp = res.mu.cwiseProduct(s);
    const double gap = mi > 0 ? comp.sum() / mi : 0.0;
    const double obj_scale = 1.0 + std::abs(0.5 * res.x.dot(pr.H * res.x) + pr.w.dot(res.x));

    if (r_dual.lpNorm<Eigen::Infinity>() <= 1e-10 * scale_w &&
        r_eq.lpNorm<Eigen::Infinity>() <= 1e-10 * scale_y &&
        r_ineq.lpNorm<Eigen::Infinity>() <= 1e-10 * scale_h && gap <= 1e-12 * obj_scale) {
      res.converged = true;
      return res;
    }

    const Eigen::VectorXd d = res.mu.cwiseQuotient(s);  // diag of G-weighting
    Eigen::MatrixXd hd = pr.H + pr.G.transpose() * d.asDiagonal() * pr.G;
    Eigen::LDLT<Eigen::MatrixXd> hd_fact(hd);
    if (hd_fact.info() != Eigen::Success) break;

    const Eigen::MatrixXd hinv_at = hd_fact.solve(pr.A.transpose());
    Eigen::MatrixXd schur = pr.A * hinv_at;
    Eigen::LDLT<Eigen::MatrixXd> schur_fact(schur);
    if (schur_fact.info() != Eigen::Success) break;

    // One Newton solve for a given complementarity target rc.
    auto newton_step = [&](const Eigen::VectorXd& rc, Eigen::VectorXd& dx, Eigen::VectorXd& dnu,
                           Eigen::VectorXd& ds, Eigen::VectorXd& dmu) {
      const Eigen::VectorXd rhs_x =
          -r_dual + pr.G.transpose() * (rc.cwiseQuotient(s) - d.cwiseProduct(r_ineq));
      const Eigen::VectorXd t = hd_fact.solve(rhs_x);
      dnu = schur_fact.solve(pr.A * t + r_eq);
      dx = t - hinv_at * dnu;
      ds = -r_ineq - pr.G * dx;
      dmu = -rc.cwiseQuotient(s) - d.cwiseProduct(ds);
    };

    auto max_step = [](const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
      double a = 1.0;
      for (int i = 0; i < v.size(); ++i) {
        if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
      }
      return a;
    };

    // Predictor.
    Eigen::VectorXd dx, dnu, ds, dmu;
    newton_step(comp, dx, dnu, ds, dmu);
    const double ap_aff = max_step(s, ds);
    const double ad_aff = max_step(res.mu, dmu);
    const double gap_aff =
        mi > 0 ? (res.mu + ad_aff * dmu).dot(s + ap_aff * ds) / mi : 0.0;
    const double sigma =
        gap > 0.0 ? std::pow(std::max(gap_aff, 0.0) / gap, 3.0) : 0.0;

    // Corrector.
    const Eigen::VectorXd rc =
        comp + dmu.cwiseProduct(ds) - sigma * gap * Eigen::VectorXd::Ones(mi);
    newton_step(rc, dx, dnu, ds, dmu);

    const double frac = 0.995;
    const double ap = std::min(1.0, frac * max_step(s, ds));
    const double ad = std::min(1.0, frac * max_step(res.mu, dmu));
    if (ap < 1e-10 && ad < 1e-10) break;  // stalled

    res.x += ap * dx;
    s += ap * ds;
    res.mu += ad * dmu;
    res.nu += ad * dnu;
  }
  return res;
}

// Minimizes 1/2 x'Hx + w'x subject to Cx = c. Handles rank-deficient C via a
// complete orthogonal decomposition; returns nullopt when the constraints are
// inconsistent or the reduced Hessian solve fails.
std::optional<Eigen::VectorXd> equality_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& w,
                                           const Eigen::MatrixXd& C, const Eigen::VectorXd& c) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(C);
  Eigen::VectorXd x_p = cod.solve(c);
  if ((C * x_p - c).lpNorm<Eigen::Infinity>() >
      1e-8 * (1.0 + c.lpNorm<Eigen::Infinity>())) {
    return std::nullopt;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(C);
  lu.setThreshold(1e-10);
  if (lu.dimensionOfKernel() == 0) return x_p;

  const Eigen::MatrixXd z = lu.kernel();
  const Eigen::MatrixXd reduced = z.transpose() * H * z;
  const Eigen::VectorXd rhs = -z.transpose() * (H * x_p + w);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(reduced);
  Eigen::VectorXd q = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success ||
      (reduced * q - rhs).lpNorm<Eigen::Infinity>() >
          1e-8 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu_r(reduced);
    if (!lu_r.isInvertible()) return std::nullopt;
    q = lu_r.solve(rhs);
  }
  return x_p + z * q;
}

struct PolishResult {
  Eigen::VectorXd x, mu, nu;
};

// Active-set refinement: starting from the interior-point classification,
// re-solve the equality-constrained KKT system on the binding rows, adding
// violated constraints and dropping rows with negative multipliers until the
// polished point is primal feasible with mu >= 0. Produces exact
// complementarity (inactive multipliers are identically zero).
std::optional<PolishResult> polish(const QpForm& qp, const Eigen::MatrixXd& H,
                                   const Eigen::VectorXd& x_ip, double act_tol) {
  const int n = qp.num_vars();
  const int me = qp.num_eq();
  const int mi = qp.num_ineq();

  std::vector<int> active;
  {
    const Eigen::VectorXd slack = qp.h - qp.G * x_ip;
    for (int i = 0; i < mi; ++i) {
      if (slack(i) < act_tol) active.push_back(i);
    }
  }

  std::set<std::vector<int>> visited;
  for (int pass = 0; pass < 80; ++pass) {
    if (!visited.insert(active).second) return std::nullopt;  // cycle
    const int na = static_cast<int>(active.size());

    Eigen::MatrixXd c_mat(me + na, n);
    Eigen::VectorXd c_rhs(me + na);
    c_mat.topRows(me) = qp.A;
    c_rhs.head(me) = qp.y;
    for (int i = 0; i < na; ++i) {
      c_mat.row(me + i) = qp.G.row(active[i]);
      c_rhs(me + i) = qp.h(active[i]);
    }

    auto x_opt = equality_qp(H, qp.w, c_mat, c_rhs);
    if (!x_opt) return std::nullopt;
    const Eigen::VectorXd& x = *x_opt;

    // Minimum-norm multipliers for  A'nu + Gact'mu = -(Hx + w).
    Eigen::MatrixXd e_mat(n, me + na);
    e_mat.leftCols(me) = qp.A.transpose();
    for (int i = 0; i < na; ++i) e_mat.col(me + i) = qp.G.row(active[i]).transpose();
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(e_mat);
    const Eigen::VectorXd duals = cod.solve(-(H * x + qp.w));
    const double stat_res = (e_mat * duals + H * x + qp.w).lpNorm<Eigen::Infinity>();
    if (stat_res > 1e-7 * (1.0 + qp.w.lpNorm<Eigen::Infinity>() +
                           (H * x).lpNorm<Eigen::Infinity>())) {
      return std::nullopt;
    }

    // Most violated inactive constraint, if any.
    const Eigen::VectorXd slack = qp.h - qp.G * x;
    int worst_idx = -1;
    double worst_viol = -1e-9;
    std::vector<bool> in_active(mi, false);
    for (int i : active) in_active[i] = true;
    for (int i = 0; i < mi; ++i) {
      if (in_active[i]) continue;
      const double rel = slack(i) / (1.0 + std::abs(qp.h(i)));
      if (rel < worst_viol) {
        worst_viol = rel;
        worst_idx = i;
      }
    }
    if (worst_idx >= 0) {
      active.insert(std::upper_bound(active.begin(), active.end(), worst_idx), worst_idx);
      continue;
    }

    // Most negative multiplier, if any.
    int drop_pos = -1;
    double most_negative = -1e-10;
    for (int i = 0; i < na; ++i) {
      if (duals(me + i) < most_negative) {
        most_negative = duals(me + i);
        drop_pos = i;
      }
    }
    if (drop_pos >= 0) {
      active.erase(active.begin() + drop_pos);
      continue;
    }

    PolishResult out;
    out.x = x;
    out.nu = duals.head(me);
    out.mu = Eigen::VectorXd::Zero(mi);
    for (int i = 0; i < na; ++i) out.mu(active[i]) = std::max(duals(me + i), 0.0);
    return out;
  }
  return std::nullopt;
}

// Elastic feasibility program: minimize e (plus a small regularizer) subject
// to Ax = y, Gx - e*1 <= h, e >= 0. The optimal e is the smallest uniform
// relaxation of the inequalities that admits a feasible point.
double min_constraint_violation(const QpForm& qp, int max_iter) {
  const int n = qp.num_vars();
  const int me = qp.num_eq();
  const int mi = qp.num_ineq();

  IpProblem pr;
  pr.H = 1e-8 * Eigen::MatrixXd::Identity(n + 1, n + 1);
  pr.w = Eigen::VectorXd::Zero(n + 1);
  pr.w(n) = 1.0;
  pr.A = Eigen::MatrixXd::Zero(me, n + 1);
  pr.A.leftCols(n) = qp.A;
  pr.y = qp.y;
  pr.G = Eigen::MatrixXd::Zero(mi + 1, n + 1);
  pr.G.topLeftCorner(mi, n) = qp.G;
  pr.G.col(n).head(mi).setConstant(-1.0);
  pr.G(mi, n) = -1.0;
  pr.h = Eigen::VectorXd::Zero(mi + 1);
  pr.h.head(mi) = qp.h;

  const IpResult r = ip_solve(pr, max_iter);
  return r.x(n);
}

}  // namespace

OpfSolution solve(const QpForm& qp, const SolverOptions& options) {
  const int n_gen = qp.num_gens;
  const int n_line = qp.num_lines;
  const int n = qp.num_vars();

  OpfSolution sol;

  // Quick capacity screen: total demand beyond total generation capacity.
  const double total_demand = qp.y(qp.num_eq() - 1);
  const double total_capacity = qp.h.segment(n_gen, n_gen).sum();
  if (total_demand > total_capacity + 1e-9 * (1.0 + total_capacity)) {
    throw Error(ErrorKind::Infeasible,
                "total demand " + std::to_string(total_demand) + " MW exceeds capacity " +
                    std::to_string(total_capacity) + " MW");
  }

  for (int j = 0; j < n_gen; ++j) {
    if (qp.Q(j, j) == 0.0) {
      sol.warnings.push_back(
          "generator " + std::to_string(j) +
          " has zero quadratic cost; dispatch ties are broken by the flow regularizer");
      break;
    }
  }

  IpProblem pr{2.0 * qp.Q, qp.w, qp.A, qp.y, qp.G, qp.h};
  const IpResult ip = ip_solve(pr, options.max_iter);
  sol.iterations = ip.iterations;

  Eigen::VectorXd x = ip.x, mu = ip.mu, nu = ip.nu;
  double residual = ip.x.size() == n ? kkt_residual(qp, x, mu, nu)
                                     : std::numeric_limits<double>::infinity();

  if (auto polished = polish(qp, pr.H, ip.x, options.act_tol)) {
    const double polished_residual = kkt_residual(qp, polished->x, polished->mu, polished->nu);
    if (polished_residual <= residual || polished_residual <= options.kkt_tol) {
      x = polished->x;
      mu = polished->mu;
      nu = polished->nu;
      residual = polished_residual;
      sol.refined = true;
    }
  }

  if (!(residual <= options.kkt_tol)) {
    // Distinguish an infeasible program from plain non-convergence.
    const double violation = min_constraint_violation(qp, options.max_iter);
    if (violation > 1e-6) {
      throw Error(ErrorKind::Infeasible,
                  "constraints cannot be satisfied; minimum uniform violation ≈ " +
                      std::to_string(violation) + " MW");
    }
    throw Error(ErrorKind::MaxIterations,
                "solver stopped with KKT residual " + std::to_string(residual) +
                    " > tolerance " + std::to_string(options.kkt_tol));
  }

  if (qp.objective(x) < -1e18) {
    throw Error(ErrorKind::Unbounded, "objective diverged; assembled QP is malformed");
  }

  // Multipliers may only dip to -1e-10 numerically; clamp those to zero.
  for (int i = 0; i < mu.size(); ++i) {
    if (mu(i) < 0.0 && mu(i) >= -1e-10) mu(i) = 0.0;
  }

  sol.g = x.head(n_gen);
  sol.p = x.tail(n_line);
  sol.mu = mu;
  sol.nu = nu;
  sol.kkt_residual = residual;
  sol.objective = qp.objective(x);

  const Eigen::VectorXd slack = qp.h - qp.G * x;
  for (int i = 0; i < qp.num_ineq(); ++i) {
    if (std::abs(slack(i)) < options.act_tol) sol.active_set.push_back(i);
  }
  return sol;
}

}  // namespace gridburden
