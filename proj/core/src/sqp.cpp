#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "cgrom/solvers.hpp"

namespace cgrom {

const char* to_string(NlpStatus status) {
  switch (status) {
    case NlpStatus::converged: return "converged";
    case NlpStatus::acceptable: return "acceptable";
    case NlpStatus::max_iter: return "max_iter";
    case NlpStatus::infeasible_detected: return "infeasible_detected";
  }
  return "unknown";
}

void SolverOptions::validate() const {
  require(max_iter > 0, "SolverOptions: max_iter must be positive");
  require(ftol > 0.0 && gtol > 0.0 && xtol > 0.0 && constraint_tol > 0.0,
          "SolverOptions: tolerances must be positive");
}

FunctionNlp::FunctionNlp(Index dim, ScalarFn objective, VectorFn gradient)
    : dim_(dim), objective_(std::move(objective)), gradient_(std::move(gradient)) {
  require(dim_ > 0, "FunctionNlp: dimension must be positive");
  require(objective_ && gradient_, "FunctionNlp: objective and gradient are required");
}

FunctionNlp& FunctionNlp::equalities(Index count, VectorFn values, MatrixFn jacobian) {
  n_eq_ = count;
  eq_ = std::move(values);
  eq_jacobian_ = std::move(jacobian);
  return *this;
}

FunctionNlp& FunctionNlp::inequalities(Index count, VectorFn values, MatrixFn jacobian) {
  n_ineq_ = count;
  ineq_ = std::move(values);
  ineq_jacobian_ = std::move(jacobian);
  return *this;
}

FunctionNlp& FunctionNlp::hessian(MatrixFn hessian) {
  hessian_ = std::move(hessian);
  return *this;
}

FunctionNlp& FunctionNlp::convex(bool flag) {
  convex_ = flag;
  return *this;
}

NlpValues FunctionNlp::values(const Vector& x) const {
  NlpValues v;
  v.objective = objective_(x);
  v.eq = n_eq_ > 0 ? eq_(x) : Vector(0);
  v.ineq = n_ineq_ > 0 ? ineq_(x) : Vector(0);
  return v;
}

NlpDerivatives FunctionNlp::derivatives(const Vector& x) const {
  NlpDerivatives d;
  d.gradient = gradient_(x);
  d.eq_jacobian = n_eq_ > 0 ? eq_jacobian_(x) : Matrix(0, dim_);
  d.ineq_jacobian = n_ineq_ > 0 ? ineq_jacobian_(x) : Matrix(0, dim_);
  if (hessian_) d.hessian = hessian_(x);
  return d;
}

namespace {

double violation_l1(const NlpValues& v) {
  double s = v.eq.lpNorm<1>();
  for (Index i = 0; i < v.ineq.size(); ++i) s += std::max(0.0, -v.ineq[i]);
  return s;
}

bool feasible(const NlpValues& v, double tol) {
  const double eq = v.eq.size() > 0 ? v.eq.lpNorm<Eigen::Infinity>() : 0.0;
  const double in = v.ineq.size() > 0 ? std::max(0.0, -v.ineq.minCoeff()) : 0.0;
  return eq <= tol && in <= tol;
}

// Symmetrizes and, if needed, shifts the Hessian so the QP is strictly convex.
Matrix convexify(const Matrix& h) {
  Matrix hs = 0.5 * (h + h.transpose());
  const double dmax = hs.diagonal().cwiseAbs().maxCoeff();
  const double scale = dmax > 0.0 ? dmax : 1.0;
  double shift = 0.0;
  for (int attempt = 0; attempt < 30; ++attempt) {
    Matrix trial = hs;
    if (shift > 0.0) trial.diagonal().array() += shift;
    Eigen::LLT<Matrix> llt(trial);
    if (llt.info() == Eigen::Success) {
      const Vector piv = Matrix(llt.matrixL()).diagonal().cwiseAbs2();
      if (piv.minCoeff() > 1e-14 * piv.maxCoeff()) return trial;
    }
    shift = shift == 0.0 ? 1e-12 * scale : shift * 10.0;
  }
  return Matrix::Identity(h.rows(), h.cols()) * scale;
}

struct Subproblem {
  Vector step;
  Vector lam_eq;
  Vector lam_in;
  bool elastic = false;
  double relaxation = 0.0;
  bool ok = false;
};

Subproblem solve_subproblem(const Matrix& h, const NlpValues& v, const NlpDerivatives& d) {
  Subproblem sp;
  QpResult qp = solve_qp(h, d.gradient, d.eq_jacobian, v.eq, d.ineq_jacobian, v.ineq);
  if (qp.status == QpStatus::optimal && qp.x.allFinite()) {
    sp.step = std::move(qp.x);
    sp.lam_eq = std::move(qp.multipliers_eq);
    sp.lam_in = std::move(qp.multipliers_ineq);
    sp.ok = true;
    return sp;
  }

  // Elastic subproblem: constraint residuals scaled by (1 - s), s in [0, 1].
  const Index n = h.rows();
  const Index ne = v.eq.size();
  const Index ni = v.ineq.size();
  const double penalty = 1e4 * std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
  Matrix ha = Matrix::Zero(n + 1, n + 1);
  ha.topLeftCorner(n, n) = h;
  ha(n, n) = penalty;
  Vector ga(n + 1);
  ga << d.gradient, penalty;
  Matrix ae(ne, n + 1);
  if (ne > 0) ae << d.eq_jacobian, -v.eq;
  Matrix ai(ni + 2, n + 1);
  Vector bi(ni + 2);
  for (Index i = 0; i < ni; ++i) {
    ai.row(i).head(n) = d.ineq_jacobian.row(i);
    ai(i, n) = -std::min(v.ineq[i], 0.0);
    bi[i] = v.ineq[i];
  }
  ai.row(ni).setZero();
  ai(ni, n) = 1.0;
  bi[ni] = 0.0;
  ai.row(ni + 1).setZero();
  ai(ni + 1, n) = -1.0;
  bi[ni + 1] = 1.0;
  QpResult el = solve_qp(ha, ga, ae, v.eq, ai, bi);
  sp.elastic = true;
  if (el.status != QpStatus::optimal || !el.x.allFinite()) return sp;
  sp.step = el.x.head(n);
  sp.relaxation = el.x[n];
  sp.lam_eq = el.multipliers_eq;
  sp.lam_in = el.multipliers_ineq.head(ni);
  sp.ok = true;
  return sp;
}

void fill_kkt(NlpResult& res, const NlpValues& v, const NlpDerivatives& d, const Vector& lam_eq,
              const Vector& lam_in) {
  const Vector jte = d.eq_jacobian.transpose() * lam_eq;
  const Vector jti = d.ineq_jacobian.transpose() * lam_in;
  const Vector lag = d.gradient - jte - jti;
  auto inf = [](const Vector& a) { return a.size() > 0 ? a.lpNorm<Eigen::Infinity>() : 0.0; };
  const double scale = std::max({1.0, inf(d.gradient), inf(jte), inf(jti)});
  res.kkt_stationarity = inf(lag) / scale;
  res.kkt_feasibility_eq = inf(v.eq);
  res.kkt_feasibility_ineq = v.ineq.size() > 0 ? std::max(0.0, -v.ineq.minCoeff()) : 0.0;
  res.kkt_complementarity = inf(Vector(lam_in.cwiseProduct(v.ineq)));
  res.multipliers_eq = lam_eq;
  res.multipliers_ineq = lam_in;
  res.objective = v.objective;
}

bool kkt_ok(const NlpResult& r, const SolverOptions& o) {
  return r.kkt_stationarity <= o.gtol && r.kkt_feasibility_eq <= o.constraint_tol &&
         r.kkt_feasibility_ineq <= o.constraint_tol && r.kkt_complementarity <= o.constraint_tol;
}

void check_shapes(const NlpProblem& problem, const NlpValues& v) {
  require(v.eq.size() == problem.n_eq(), "solve_nlp: equality count differs from n_eq()");
  require(v.ineq.size() == problem.n_ineq(), "solve_nlp: inequality count differs from n_ineq()");
  require(std::isfinite(v.objective), "solve_nlp: objective is not finite");
}

// Outer approximation for convex problems: each inequality linearization
// a'(y - x_k) + g(x_k) >= 0 is valid for all y and is kept.  Piecewise-linear
// constraints (total variation) terminate after finitely many cuts.
NlpResult solve_outer_approximation(const NlpProblem& problem, const SolverOptions& opt, Vector x) {
  const Index n = x.size();
  Matrix cuts(0, n);
  Vector offsets(0);           // cut: cuts.row(k) y + offsets[k] >= 0
  std::vector<Index> owner;    // inequality row that produced each cut
  NlpResult res;
  auto finish = [&](NlpStatus status, int iterations) {
    res.point = x;
    res.status = status;
    res.iterations = iterations;
    return res;
  };

  for (int iter = 0;; ++iter) {
    const NlpValues vals = problem.values(x);
    check_shapes(problem, vals);
    const NlpDerivatives ders = problem.derivatives(x);
    bool new_cut = false;
    for (Index i = 0; i < vals.ineq.size(); ++i) {
      const Vector a = ders.ineq_jacobian.row(i).transpose();
      const double beta = vals.ineq[i] - a.dot(x);
      bool duplicate = false;
      for (Index k = 0; k < cuts.rows() && !duplicate; ++k) {
        if (owner[static_cast<std::size_t>(k)] != i) continue;
        const double da = (cuts.row(k).transpose() - a).lpNorm<Eigen::Infinity>();
        duplicate = da <= 1e-14 * std::max(1.0, a.lpNorm<Eigen::Infinity>()) &&
                    std::abs(offsets[k] - beta) <= 1e-14 * std::max(1.0, std::abs(beta));
      }
      if (duplicate) continue;
      cuts.conservativeResize(cuts.rows() + 1, Eigen::NoChange);
      cuts.row(cuts.rows() - 1) = a.transpose();
      offsets.conservativeResize(offsets.size() + 1);
      offsets[offsets.size() - 1] = beta;
      owner.push_back(i);
      new_cut = true;
    }

    const Vector slack = cuts * x + offsets;
    const Matrix h = convexify(ders.hessian ? *ders.hessian : Matrix::Identity(n, n));
    const QpResult qp = solve_qp(h, ders.gradient, ders.eq_jacobian, vals.eq, cuts, slack);
    if (qp.status != QpStatus::optimal || !qp.x.allFinite()) {
      Vector lam_in = Vector::Zero(vals.ineq.size());
      fill_kkt(res, vals, ders, Vector::Zero(vals.eq.size()), lam_in);
      return finish(NlpStatus::infeasible_detected, iter);
    }

    // KKT with the cut multipliers; reported per original inequality row.
    Vector lam_in = Vector::Zero(vals.ineq.size());
    for (std::size_t k = 0; k < owner.size(); ++k) lam_in[owner[k]] += qp.multipliers_ineq[static_cast<Index>(k)];
    auto inf = [](const Vector& a) { return a.size() > 0 ? a.lpNorm<Eigen::Infinity>() : 0.0; };
    const Vector jte = ders.eq_jacobian.transpose() * qp.multipliers_eq;
    const Vector jti = cuts.transpose() * qp.multipliers_ineq;
    const double scale = std::max({1.0, inf(ders.gradient), inf(jte), inf(jti)});
    res.kkt_stationarity = inf(Vector(ders.gradient - jte - jti)) / scale;
    res.kkt_feasibility_eq = inf(vals.eq);
    res.kkt_feasibility_ineq = vals.ineq.size() > 0 ? std::max(0.0, -vals.ineq.minCoeff()) : 0.0;
    res.kkt_complementarity = inf(Vector(qp.multipliers_ineq.cwiseProduct(slack)));
    res.multipliers_eq = qp.multipliers_eq;
    res.multipliers_ineq = lam_in;
    res.objective = vals.objective;

    if (kkt_ok(res, opt)) return finish(NlpStatus::converged, iter);
    const double step_inf = qp.x.lpNorm<Eigen::Infinity>();
    if (step_inf <= opt.xtol * std::max(1.0, x.lpNorm<Eigen::Infinity>())) {
      if (feasible(vals, opt.constraint_tol)) return finish(NlpStatus::acceptable, iter);
      if (!new_cut) return finish(NlpStatus::max_iter, iter);
    }
    if (iter >= opt.max_iter) return finish(NlpStatus::max_iter, iter);
    x += qp.x;
  }
}

}  // namespace

NlpResult solve_nlp(const NlpProblem& problem, const SolverOptions& opt) {
  opt.validate();
  const Index n = problem.dim();
  require(n > 0, "solve_nlp: problem dimension must be positive");
  Vector x = Vector::Zero(n);
  if (opt.warm_start) {
    require(opt.warm_start->size() == n, "solve_nlp: warm start has wrong length");
    x = *opt.warm_start;
  }
  if (problem.convex()) return solve_outer_approximation(problem, opt, std::move(x));

  NlpResult res;
  NlpValues vals = problem.values(x);
  check_shapes(problem, vals);
  NlpDerivatives ders = problem.derivatives(x);
  Matrix bfgs = Matrix::Identity(n, n);
  double rho = 0.0;
  int elastic_streak = 0;
  bool stalled = false;

  auto finish = [&](NlpStatus status, int iterations) {
    res.point = x;
    res.status = status;
    res.iterations = iterations;
    return res;
  };

  // Lowest-objective feasible iterate; returned as acceptable when the
  // iteration breaks down (e.g. at discontinuities of sign-based constraints).
  std::optional<Vector> best_x;
  double best_objective = std::numeric_limits<double>::infinity();
  auto remember = [&]() {
    if (feasible(vals, opt.constraint_tol) && vals.objective < best_objective) {
      best_x = x;
      best_objective = vals.objective;
    }
  };
  auto fallback = [&](NlpStatus status, int iterations) {
    remember();
    if (!best_x) return finish(status, iterations);
    x = *best_x;
    vals = problem.values(x);
    ders = problem.derivatives(x);
    const Subproblem sp = solve_subproblem(convexify(ders.hessian ? *ders.hessian : bfgs), vals, ders);
    if (sp.ok)
      fill_kkt(res, vals, ders, sp.lam_eq, sp.lam_in);
    else
      fill_kkt(res, vals, ders, Vector::Zero(vals.eq.size()), Vector::Zero(vals.ineq.size()));
    return finish(kkt_ok(res, opt) && sp.ok && !sp.elastic ? NlpStatus::converged : NlpStatus::acceptable,
                  iterations);
  };

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    const Matrix h = convexify(ders.hessian ? *ders.hessian : bfgs);
    const Subproblem sp = solve_subproblem(h, vals, ders);
    if (!sp.ok) {
      fill_kkt(res, vals, ders, Vector::Zero(vals.eq.size()), Vector::Zero(vals.ineq.size()));
      return fallback(NlpStatus::infeasible_detected, iter);
    }
    fill_kkt(res, vals, ders, sp.lam_eq, sp.lam_in);
    if (!sp.elastic && kkt_ok(res, opt)) return finish(NlpStatus::converged, iter);
    if (stalled && feasible(vals, opt.constraint_tol)) return finish(NlpStatus::acceptable, iter);
    stalled = false;

    const double xscale = std::max(1.0, x.lpNorm<Eigen::Infinity>());
    const double step_inf = sp.step.lpNorm<Eigen::Infinity>();
    if (sp.elastic) {
      ++elastic_streak;
      if ((sp.relaxation > 1.0 - 1e-8 && step_inf <= opt.xtol * xscale) || elastic_streak >= 10)
        return fallback(NlpStatus::infeasible_detected, iter);
    } else {
      elastic_streak = 0;
    }

    // l1 merit line search.
    double lam_max = 0.0;
    if (sp.lam_eq.size() > 0) lam_max = std::max(lam_max, sp.lam_eq.lpNorm<Eigen::Infinity>());
    if (sp.lam_in.size() > 0) lam_max = std::max(lam_max, sp.lam_in.lpNorm<Eigen::Infinity>());
    rho = std::max(rho, 1.5 * lam_max);
    const double viol0 = violation_l1(vals);
    const double phi0 = vals.objective + rho * viol0;
    const double slope = std::min(ders.gradient.dot(sp.step) - rho * viol0, 0.0);

    double alpha = 1.0;
    bool accepted = false;
    NlpValues trial_vals;
    Vector trial;
    for (int ls = 0; ls < 40; ++ls) {
      trial = x + alpha * sp.step;
      trial_vals = problem.values(trial);
      check_shapes(problem, trial_vals);
      const double phi = trial_vals.objective + rho * violation_l1(trial_vals);
      if (std::isfinite(phi) && phi <= phi0 + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) return fallback(NlpStatus::max_iter, iter + 1);

    NlpDerivatives trial_ders = problem.derivatives(trial);
    if (!ders.hessian) {
      // Damped BFGS on the Lagrangian gradient.
      const Vector s = trial - x;
      const Vector grad_lag_old =
          ders.gradient - ders.eq_jacobian.transpose() * sp.lam_eq - ders.ineq_jacobian.transpose() * sp.lam_in;
      const Vector grad_lag_new = trial_ders.gradient - trial_ders.eq_jacobian.transpose() * sp.lam_eq -
                                  trial_ders.ineq_jacobian.transpose() * sp.lam_in;
      Vector y = grad_lag_new - grad_lag_old;
      const Vector bs = bfgs * s;
      const double sbs = s.dot(bs);
      double sy = s.dot(y);
      if (sbs > 0.0) {
        if (sy < 0.2 * sbs) {
          const double theta = 0.8 * sbs / (sbs - sy);
          y = theta * y + (1.0 - theta) * bs;
          sy = s.dot(y);
        }
        if (sy > 0.0) bfgs += y * y.transpose() / sy - bs * bs.transpose() / sbs;
      }
    }

    remember();
    const double df = std::abs(trial_vals.objective - vals.objective);
    const double moved = (trial - x).lpNorm<Eigen::Infinity>();
    x = std::move(trial);
    vals = std::move(trial_vals);
    ders = std::move(trial_ders);
    stalled = df <= opt.ftol * std::max(1.0, std::abs(vals.objective)) ||
              moved <= opt.xtol * std::max(1.0, x.lpNorm<Eigen::Infinity>());
  }

  // Final KKT report at the last iterate.
  const Matrix h = convexify(ders.hessian ? *ders.hessian : bfgs);
  const Subproblem sp = solve_subproblem(h, vals, ders);
  if (sp.ok) {
    fill_kkt(res, vals, ders, sp.lam_eq, sp.lam_in);
    if (!sp.elastic && kkt_ok(res, opt)) return finish(NlpStatus::converged, opt.max_iter);
    if (stalled && feasible(vals, opt.constraint_tol)) return finish(NlpStatus::acceptable, opt.max_iter);
  }
  return fallback(NlpStatus::max_iter, opt.max_iter);
}

}  // namespace cgrom
