#include "cgrom/projection.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/QR>

namespace cgrom {

const char* to_string(ProjectionKind kind) {
  return kind == ProjectionKind::galerkin ? "galerkin" : "lspg";
}

ProjectionKind parse_projection_kind(const std::string& text) {
  if (text == "galerkin") return ProjectionKind::galerkin;
  if (text == "lspg") return ProjectionKind::lspg;
  throw ContractViolation("unknown projection kind '" + text + "' (expected galerkin or lspg)");
}

void RomConfig::validate(const FullOrderModel& model) const {
  require(basis.p() >= 1, "RomConfig: basis is empty");
  require(basis.n() == model.dim(), "RomConfig: basis rows do not match the model dimension");
  require(basis.p() <= model.dim(), "RomConfig: basis size exceeds the model dimension");
  require(scheme.k() == 1, "RomConfig: reduced models support one-step schemes only");
  solver.validate();
  require(hybrid.maxfev >= 1 && hybrid.xtol > 0.0, "RomConfig: invalid root-finder options");
}

Matrix ReducedTrajectory::as_matrix() const {
  if (coords.empty()) return {};
  Matrix m(coords.front().size(), static_cast<Index>(coords.size()));
  for (std::size_t j = 0; j < coords.size(); ++j) m.col(static_cast<Index>(j)) = coords[j];
  return m;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kImplicitInnerGtol = 1e-12;

void copy_kkt(const NlpResult& r, RomStepDiagnostics& d) {
  d.objective = r.objective;
  d.kkt_stationarity = r.kkt_stationarity;
  d.kkt_feasibility_eq = r.kkt_feasibility_eq;
  d.kkt_feasibility_ineq = r.kkt_feasibility_ineq;
  d.kkt_complementarity = r.kkt_complementarity;
  d.status = to_string(r.status);
}

/// min 1/2 ||Phi vhat - f||^2 with the Galerkin constraint forms at a fixed state.
/// Objective and constraints are divided by s^2 and s, s = max(1, ||f||_inf), so
/// solver tolerances are relative to the velocity magnitude.
class GalerkinVelocityProblem final : public NlpProblem {
 public:
  GalerkinVelocityProblem(const FullOrderModel& model, const RomConfig& config, const Vector& x_ref,
                          const Vector& xhat, double t, const ParamVector& mu)
      : config_(config), x_ref_(x_ref), xhat_(xhat), t_(t), mu_(mu) {
    f_ = model.velocity(decode(config.basis, x_ref, xhat), t, mu);
    scale_ = std::max(1.0, f_.lpNorm<Eigen::Infinity>());
    gram_ = config.basis.phi().transpose() * config.basis.phi() / (scale_ * scale_);
    const GalerkinConstraintEval probe = evaluate(Vector::Zero(config.basis.p()));
    n_eq_ = probe.equalities().value.size();
    n_ineq_ = probe.inequalities().value.size();
    active_ = probe.active_count();
  }

  [[nodiscard]] Index dim() const override { return config_.basis.p(); }
  [[nodiscard]] Index n_eq() const override { return n_eq_; }
  [[nodiscard]] Index n_ineq() const override { return n_ineq_; }
  [[nodiscard]] Index active_count() const { return active_; }
  [[nodiscard]] const Vector& full_velocity() const { return f_; }

  [[nodiscard]] NlpValues values(const Vector& vhat) const override {
    const GalerkinConstraintEval e = evaluate(vhat);
    NlpValues v;
    v.objective = 0.5 * (config_.basis.phi() * vhat - f_).squaredNorm() / (scale_ * scale_);
    v.eq = e.equalities().value / scale_;
    v.ineq = e.inequalities().value / scale_;
    return v;
  }

  [[nodiscard]] NlpDerivatives derivatives(const Vector& vhat) const override {
    const GalerkinConstraintEval e = evaluate(vhat);
    NlpDerivatives d;
    d.gradient = config_.basis.phi().transpose() * (config_.basis.phi() * vhat - f_) / (scale_ * scale_);
    d.eq_jacobian = e.equalities().jacobian / scale_;
    d.ineq_jacobian = e.inequalities().jacobian / scale_;
    d.hessian = gram_;
    return d;
  }

 private:
  [[nodiscard]] GalerkinConstraintEval evaluate(const Vector& vhat) const {
    return eval_galerkin_constraints(config_.constraints, config_.basis, x_ref_, vhat, xhat_, t_, mu_);
  }

  const RomConfig& config_;
  const Vector& x_ref_;
  Vector xhat_;
  double t_;
  const ParamVector& mu_;
  Vector f_;
  double scale_ = 1.0;
  Matrix gram_;
  Index n_eq_ = 0;
  Index n_ineq_ = 0;
  Index active_ = 0;
};

NlpResult solve_galerkin_velocity(const FullOrderModel& model, const RomConfig& config, const Vector& x_ref,
                                  const Vector& xhat, double t, const ParamVector& mu,
                                  const std::optional<Vector>& warm_start, Index* active) {
  const GalerkinVelocityProblem problem(model, config, x_ref, xhat, t, mu);
  SolverOptions opts = config.solver;
  // The implicit step differentiates vhat(xhat) by finite differences, so a loosely
  // converged inner solve shows up as Jacobian noise in the outer root finder.
  if (!config.scheme.is_explicit()) opts.gtol = std::min(opts.gtol, kImplicitInnerGtol);
  opts.warm_start = warm_start ? *warm_start : Vector(config.basis.phi().transpose() * problem.full_velocity());
  if (active != nullptr) *active = problem.active_count();
  return solve_nlp(problem, opts);
}

/// Sum_{j>=1} (alpha_j y^{n-j} - dt beta_j g^{n-j}).
Vector history_sum(const LinearMultistepScheme& scheme, const StateHistory& history) {
  Vector out = Vector::Zero(history.state(1).size());
  for (int j = 1; j <= scheme.k(); ++j) {
    out += scheme.alpha(j) * history.state(j);
    if (scheme.beta(j) != 0.0) out -= scheme.dt() * scheme.beta(j) * history.velocity(j);
  }
  return out;
}

/// Constrained or plain Galerkin velocity at (xhat, t); updates the warm start.
Vector reduced_velocity(const FullOrderModel& model, const RomConfig& config, RomState& state, const Vector& xhat,
                        double t, RomStepDiagnostics& diag, bool record) {
  if (config.constraints.empty()) return galerkin_velocity(model, config, xhat, t, state.mu);
  Index active = 0;
  const NlpResult r =
      solve_galerkin_velocity(model, config, state.x_ref, xhat, t, state.mu, state.inner_warm_start, &active);
  ++diag.inner_solves;
  diag.max_inner_iterations = std::max(diag.max_inner_iterations, r.iterations);
  state.inner_warm_start = r.point;
  if (record) {
    copy_kkt(r, diag);
    diag.active_constraints = static_cast<int>(active);
    if (!r.usable()) {
      std::ostringstream os;
      os << "constrained Galerkin velocity: " << to_string(r.status) << " after " << r.iterations
         << " iterations (stationarity " << r.kkt_stationarity << ", infeasibility "
         << std::max(r.kkt_feasibility_eq, r.kkt_feasibility_ineq) << ")";
      throw StepFailure(os.str(), diag);
    }
  }
  return r.point;
}

}  // namespace

Vector galerkin_velocity(const FullOrderModel& model, const RomConfig& config, const Vector& xhat, double t,
                         const ParamVector& mu) {
  const Vector x = decode(config.basis, config.x_ref, xhat, mu);
  return config.basis.phi().transpose() * model.velocity(x, t, mu);
}

NlpResult constrained_galerkin_velocity(const FullOrderModel& model, const RomConfig& config, const Vector& xhat,
                                        double t, const ParamVector& mu, const std::optional<Vector>& warm_start) {
  return solve_galerkin_velocity(model, config, config.x_ref(mu), xhat, t, mu, warm_start, nullptr);
}

RomState::RomState(const FullOrderModel& model, const RomConfig& config, ParamVector mu_in)
    : mu(std::move(mu_in)), x_ref(config.x_ref(mu)), reduced(config.scheme.k()), full(config.scheme.k()) {
  model.check_params(mu);
  require(x_ref.size() == model.dim(), "RomState: reference state has the wrong length");
}

// ---------------------------------------------------------------------------
// Galerkin

StepResult galerkin_step(const FullOrderModel& model, const RomConfig& config, RomState& state, int n) {
  const LinearMultistepScheme& scheme = config.scheme;
  const double tn = scheme.time(n);
  const double a0 = scheme.alpha(0);
  const Vector hist = history_sum(scheme, state.reduced);
  StepResult out;

  if (scheme.is_explicit()) {
    out.xhat = -hist / a0;
  } else if (config.constraints.empty()) {
    const double c = scheme.dt() * scheme.beta(0);
    const Matrix& phi = config.basis.phi();
    const ResidualFn residual = [&](const Vector& xh) -> Vector {
      return a0 * xh + hist - c * galerkin_velocity(model, config, xh, tn, state.mu);
    };
    const DenseJacobianFn jacobian = [&](const Vector& xh) -> Matrix {
      const SparseMatrix jf = model.velocity_jacobian(decode(config.basis, state.x_ref, xh), tn, state.mu);
      Matrix jr = -c * (phi.transpose() * (jf * phi));
      jr.diagonal().array() += a0;
      return jr;
    };
    const NewtonResult res = newton_solve(residual, jacobian, state.reduced.state(1), config.newton);
    out.diagnostics.iterations = res.iterations;
    out.diagnostics.root_residual = res.residual_norm;
    if (!res.converged()) {
      out.diagnostics.status = to_string(res.status);
      throw StepFailure(std::string("reduced Newton: ") + to_string(res.status), out.diagnostics);
    }
    out.xhat = res.x;
  } else {
    const double c = scheme.dt() * scheme.beta(0);
    RomStepDiagnostics& diag = out.diagnostics;
    const ResidualFn residual = [&](const Vector& xh) -> Vector {
      return a0 * xh + hist - c * reduced_velocity(model, config, state, xh, tn, diag, false);
    };
    const HybridResult res = hybrid_root(residual, state.reduced.state(1), config.hybrid);
    diag.iterations = res.nfev;
    diag.root_residual = res.fvec.norm();
    if (!res.converged()) {
      diag.status = to_string(res.status);
      std::ostringstream os;
      os << "hybrid root finder: " << to_string(res.status) << " after " << res.nfev
         << " evaluations (||r|| = " << diag.root_residual << ")";
      throw StepFailure(os.str(), diag);
    }
    out.xhat = res.x;
  }

  // fhat at the accepted state: used by the next explicit step and by the rsum metric.
  out.fhat = reduced_velocity(model, config, state, out.xhat, tn, out.diagnostics, true);
  if (!scheme.is_explicit() && !config.constraints.empty())
    out.diagnostics.root_residual = (a0 * out.xhat + hist - scheme.dt() * scheme.beta(0) * out.fhat).norm();
  return out;
}

// ---------------------------------------------------------------------------
// LSPG

StepResult lspg_step_unconstrained(const FullOrderModel& model, const RomConfig& config, RomState& state, int n) {
  const LinearMultistepScheme& scheme = config.scheme;
  const ReducedBasis& basis = config.basis;
  const Matrix& phi = basis.phi();
  StepResult out;
  Vector xh = state.reduced.state(1);
  auto residual = [&](const Vector& y) {
    return discrete_residual(model, scheme, state.full, decode(basis, state.x_ref, y), n, state.mu);
  };

  if (scheme.is_explicit()) {
    // r is affine with slope alpha_0 Phi; for orthonormal Phi one Gauss-Newton
    // step lands on the minimizer.
    const Vector r = residual(xh);
    xh -= phi.transpose() * r / scheme.alpha(0);
    out.xhat = std::move(xh);
    out.diagnostics.iterations = 1;
    return out;
  }

  const NewtonOptions& nopt = config.newton;
  Vector r = residual(xh);
  const double r0 = r.norm();
  double rn = r0;
  auto small = [&](double norm) { return norm < nopt.abs_tol || (r0 > 0.0 && norm / r0 < nopt.rel_tol); };
  bool done = rn < nopt.abs_tol;
  int it = 0;
  while (!done && it < std::max(nopt.max_iter, config.solver.max_iter)) {
    const SparseMatrix jr = discrete_residual_jacobian(model, scheme, decode(basis, state.x_ref, xh), n, state.mu);
    const Matrix a = jr * phi;
    const Vector grad = a.transpose() * r;
    if (grad.norm() <= config.solver.gtol * a.norm() * rn) {
      done = true;
      break;
    }
    const Vector dx = a.colPivHouseholderQr().solve(-r);
    if (!dx.allFinite()) break;
    const double slope = grad.dot(dx);
    double step = 1.0;
    Vector trial;
    Vector rt;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      trial = xh + step * dx;
      rt = residual(trial);
      if (0.5 * rt.squaredNorm() <= 0.5 * rn * rn + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++it;
    if (!accepted) {
      // No decrease along the Gauss-Newton direction: a least-squares minimizer to rounding.
      done = true;
      break;
    }
    const double dnorm = (trial - xh).norm();
    xh = std::move(trial);
    r = std::move(rt);
    rn = r.norm();
    if (small(rn) || dnorm <= config.solver.xtol * std::max(1.0, xh.norm())) done = true;
  }
  out.diagnostics.iterations = it;
  out.diagnostics.objective = 0.5 * rn * rn;
  if (!done) {
    out.diagnostics.status = "max_iter";
    throw StepFailure("LSPG Gauss-Newton did not converge in " + std::to_string(it) + " iterations",
                      out.diagnostics);
  }
  out.xhat = std::move(xh);
  return out;
}

namespace {

class LspgStepProblem final : public NlpProblem {
 public:
  LspgStepProblem(const FullOrderModel& model, const RomConfig& config, const RomState& state, int n)
      : model_(model), config_(config), state_(state), n_(n) {}

  [[nodiscard]] Index dim() const override { return config_.basis.p(); }
  [[nodiscard]] Index n_eq() const override {
    return config_.constraints.kin_eq_rows() + config_.constraints.dyn_eq_rows();
  }
  [[nodiscard]] Index n_ineq() const override {
    return config_.constraints.kin_ineq_rows() + config_.constraints.dyn_ineq_rows();
  }

  /// Explicit schemes make the residual affine in xhat; the problem is then
  /// convex when the constraints are affine or (inequalities) concave.
  [[nodiscard]] bool convex() const override {
    const ConstraintSet& set = config_.constraints;
    if (!config_.scheme.is_explicit() || !set.kin_eq.empty()) return false;
    const auto linear = [](const auto& c) { return c->linear_in_velocity(); };
    const auto concave = [](const auto& c) { return c->concave(); };
    return std::all_of(set.kin_ineq.begin(), set.kin_ineq.end(), concave) &&
           std::all_of(set.dyn_eq.begin(), set.dyn_eq.end(), linear) &&
           std::all_of(set.dyn_ineq.begin(), set.dyn_ineq.end(), linear);
  }

  [[nodiscard]] NlpValues values(const Vector& xh) const override {
    const Vector r = discrete_residual(model_, config_.scheme, state_.full, decode_(xh), n_, state_.mu);
    const LspgConstraintEval e = constraints(xh);
    NlpValues v;
    v.objective = 0.5 * r.squaredNorm();
    v.eq = e.equalities().value;
    v.ineq = e.inequalities().value;
    return v;
  }

  [[nodiscard]] NlpDerivatives derivatives(const Vector& xh) const override {
    const Vector x = decode_(xh);
    const Vector r = discrete_residual(model_, config_.scheme, state_.full, x, n_, state_.mu);
    const SparseMatrix jr = discrete_residual_jacobian(model_, config_.scheme, x, n_, state_.mu);
    const Matrix a = jr * config_.basis.phi();
    const LspgConstraintEval e = constraints(xh);
    NlpDerivatives d;
    d.gradient = a.transpose() * r;
    d.hessian = a.transpose() * a;
    d.eq_jacobian = e.equalities().jacobian;
    d.ineq_jacobian = e.inequalities().jacobian;
    return d;
  }

 private:
  [[nodiscard]] Vector decode_(const Vector& xh) const { return decode(config_.basis, state_.x_ref, xh); }
  [[nodiscard]] LspgConstraintEval constraints(const Vector& xh) const {
    return eval_lspg_constraints(config_.constraints, config_.basis, state_.x_ref, config_.scheme, state_.full, xh,
                                 n_, state_.mu);
  }

  const FullOrderModel& model_;
  const RomConfig& config_;
  const RomState& state_;
  int n_;
};

}  // namespace

StepResult lspg_step_constrained(const FullOrderModel& model, const RomConfig& config, RomState& state, int n) {
  const LspgStepProblem problem(model, config, state, n);
  SolverOptions opts = config.solver;
  opts.warm_start = state.reduced.state(1);
  const NlpResult r = solve_nlp(problem, opts);
  StepResult out;
  copy_kkt(r, out.diagnostics);
  out.diagnostics.iterations = r.iterations;
  int binding = 0;
  for (Index i = 0; i < r.multipliers_ineq.size(); ++i)
    if (r.multipliers_ineq[i] > 0.0) ++binding;
  out.diagnostics.active_constraints = binding;
  if (!r.usable()) {
    std::ostringstream os;
    os << "constrained LSPG step: " << to_string(r.status) << " after " << r.iterations
       << " iterations (stationarity " << r.kkt_stationarity << ", infeasibility "
       << std::max(r.kkt_feasibility_eq, r.kkt_feasibility_ineq) << ")";
    throw StepFailure(os.str(), out.diagnostics);
  }
  out.xhat = r.point;
  return out;
}

// ---------------------------------------------------------------------------

ReducedTrajectory simulate_rom(const FullOrderModel& model, const RomConfig& config, const ParamVector& mu) {
  config.validate(model);
  RomState state(model, config, mu);
  const LinearMultistepScheme& scheme = config.scheme;
  const bool galerkin = config.kind == ProjectionKind::galerkin;
  ReducedTrajectory traj;

  auto accept = [&](Vector xhat, Vector fhat, int n) {
    const double t = scheme.time(n);
    traj.times.push_back(t);
    traj.coords.push_back(xhat);
    if (galerkin) {
      traj.velocities.push_back(fhat);
      state.reduced.push(std::move(xhat), std::move(fhat));
    } else {
      Vector x = decode(config.basis, state.x_ref, xhat);
      Vector f = model.velocity(x, t, mu);
      state.full.push(std::move(x), std::move(f));
      state.reduced.push(std::move(xhat), Vector::Zero(config.basis.p()));
    }
  };

  const Vector x0 = model.initial_state(mu);
  const Vector xhat0 = encode(config.basis, state.x_ref, x0);
  try {
    Vector fhat0;
    if (galerkin) {
      RomStepDiagnostics ignored;
      fhat0 = reduced_velocity(model, config, state, xhat0, 0.0, ignored, true);
    }
    accept(xhat0, std::move(fhat0), 0);
  } catch (const StepFailure& e) {
    traj.failed_step = 0;
    traj.message = std::string("initial velocity: ") + e.what();
    return traj;
  }

  for (int n = 1; n <= scheme.n_steps(); ++n) {
    try {
      StepResult step;
      if (galerkin)
        step = galerkin_step(model, config, state, n);
      else if (config.constraints.empty())
        step = lspg_step_unconstrained(model, config, state, n);
      else
        step = lspg_step_constrained(model, config, state, n);
      if (!step.xhat.allFinite()) throw StepFailure("non-finite reduced state", step.diagnostics);
      traj.diagnostics.push_back(step.diagnostics);
      accept(std::move(step.xhat), std::move(step.fhat), n);
    } catch (const StepFailure& e) {
      traj.diagnostics.push_back(e.diagnostics());
      traj.failed_step = n;
      traj.message = "step " + std::to_string(n) + ": " + e.what();
      return traj;
    }
  }
  traj.completed = true;
  return traj;
}

}  // namespace cgrom
