#include "cgrom/fom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cgrom {

void FullOrderModel::check_params(const ParamVector& mu) const {
  if (mu.size() != param_dim()) {
    std::ostringstream os;
    os << name() << ": expected " << param_dim() << " parameters, got " << mu.size();
    throw ContractViolation(os.str());
  }
}

void FullOrderModel::check_state(const Vector& x, const char* what) const {
  if (x.size() != dim()) {
    std::ostringstream os;
    os << name() << ": " << what << " has length " << x.size() << ", expected " << dim();
    throw ContractViolation(os.str());
  }
}

FunctionModel::FunctionModel(std::string name, Index dim, Index param_dim, double final_time,
                             VelocityFn velocity, JacobianFn jacobian, InitialFn initial)
    : name_(std::move(name)),
      dim_(dim),
      param_dim_(param_dim),
      final_time_(final_time),
      velocity_(std::move(velocity)),
      jacobian_(std::move(jacobian)),
      initial_(std::move(initial)) {
  require(dim_ > 0, "FunctionModel: dimension must be positive");
  require(param_dim_ >= 0, "FunctionModel: negative parameter dimension");
  require(final_time_ > 0.0, "FunctionModel: final time must be positive");
  require(velocity_ && jacobian_ && initial_, "FunctionModel: all callables are required");
}

Vector FunctionModel::velocity(const Vector& x, double t, const ParamVector& mu) const {
  check_state(x, "state");
  Vector f = velocity_(x, t, mu);
  check_state(f, "velocity");
  return f;
}

SparseMatrix FunctionModel::velocity_jacobian(const Vector& x, double t, const ParamVector& mu) const {
  check_state(x, "state");
  SparseMatrix jac = jacobian_(x, t, mu);
  require(jac.rows() == dim_ && jac.cols() == dim_, name_ + ": Jacobian has wrong shape");
  return jac;
}

Vector FunctionModel::initial_state(const ParamVector& mu) const {
  Vector x0 = initial_(mu);
  check_state(x0, "initial state");
  return x0;
}

// ---------------------------------------------------------------------------

LinearMultistepScheme::LinearMultistepScheme(std::vector<double> alpha, std::vector<double> beta,
                                             double final_time, int n_steps)
    : alpha_(std::move(alpha)), beta_(std::move(beta)), final_time_(final_time), n_steps_(n_steps) {
  require(alpha_.size() >= 2, "scheme: need k >= 1 (at least two alpha coefficients)");
  require(alpha_.size() == beta_.size(), "scheme: alpha and beta must have equal length");
  require(alpha_[0] != 0.0, "scheme: alpha_0 must be nonzero");
  require(final_time_ > 0.0 && std::isfinite(final_time_), "scheme: final time must be positive");
  require(n_steps_ > 0, "scheme: step count must be positive");
  const double sum = std::accumulate(alpha_.begin(), alpha_.end(), 0.0);
  double scale = 0.0;
  for (double a : alpha_) scale = std::max(scale, std::abs(a));
  require(std::abs(sum) <= 1e-14 * scale, "scheme: alpha coefficients must sum to zero");
  const bool beta_zero = std::all_of(beta_.begin(), beta_.end(), [](double b) { return b == 0.0; });
  require(!beta_zero, "scheme: all beta coefficients are zero");
  if (beta_[0] == 0.0) require(beta_[1] != 0.0, "scheme: explicit schemes need beta_1 != 0");
  dt_ = final_time_ / n_steps_;
}

LinearMultistepScheme LinearMultistepScheme::backward_euler(double final_time, int n_steps) {
  return {{1.0, -1.0}, {1.0, 0.0}, final_time, n_steps};
}

LinearMultistepScheme LinearMultistepScheme::explicit_euler(double final_time, int n_steps) {
  return {{1.0, -1.0}, {0.0, 1.0}, final_time, n_steps};
}

std::string LinearMultistepScheme::name() const {
  if (k() == 1 && alpha_[0] == 1.0 && alpha_[1] == -1.0) {
    if (beta_[0] == 1.0 && beta_[1] == 0.0) return "backward_euler";
    if (beta_[0] == 0.0 && beta_[1] == 1.0) return "explicit_euler";
  }
  return "lms" + std::to_string(k());
}

// ---------------------------------------------------------------------------

StateHistory::StateHistory(int capacity) : capacity_(capacity) {
  require(capacity_ >= 1, "StateHistory: capacity must be at least 1");
}

void StateHistory::push(Vector state, Vector velocity) {
  require(state.size() == velocity.size(), "StateHistory: state/velocity length mismatch");
  if (!states_.empty()) require(state.size() == states_.front().size(), "StateHistory: state length changed");
  states_.push_front(std::move(state));
  velocities_.push_front(std::move(velocity));
  if (size() > capacity_) {
    states_.pop_back();
    velocities_.pop_back();
  }
}

const Vector& StateHistory::state(int j) const {
  require(j >= 1 && j <= size(), "StateHistory: insufficient history");
  return states_[static_cast<std::size_t>(j - 1)];
}

const Vector& StateHistory::velocity(int j) const {
  require(j >= 1 && j <= size(), "StateHistory: insufficient history");
  return velocities_[static_cast<std::size_t>(j - 1)];
}

Matrix TrajectorySolution::as_matrix() const {
  if (states.empty()) return {};
  Matrix m(states.front().size(), static_cast<Index>(states.size()));
  for (std::size_t n = 0; n < states.size(); ++n) m.col(static_cast<Index>(n)) = states[n];
  return m;
}

// ---------------------------------------------------------------------------

namespace {

void check_history(const LinearMultistepScheme& scheme, const StateHistory& history, Index dim) {
  require(history.size() >= scheme.k(), "insufficient history for the multistep scheme");
  require(history.state(1).size() == dim, "history state length does not match the trial state");
}

// sum_{j>=1} alpha_j x^{n-j} - dt sum_{j>=1} beta_j f^{n-j}
Vector history_term(const LinearMultistepScheme& scheme, const StateHistory& history) {
  Vector acc = Vector::Zero(history.state(1).size());
  for (int j = 1; j <= scheme.k(); ++j) {
    if (scheme.alpha(j) != 0.0) acc.noalias() += scheme.alpha(j) * history.state(j);
    if (scheme.beta(j) != 0.0) acc.noalias() -= scheme.dt() * scheme.beta(j) * history.velocity(j);
  }
  return acc;
}

}  // namespace

Vector continuous_residual(const FullOrderModel& model, const Vector& v, const Vector& xi, double tau,
                           const ParamVector& mu) {
  model.check_state(v, "velocity");
  model.check_state(xi, "state");
  model.check_params(mu);
  return v - model.velocity(xi, tau, mu);
}

Vector discrete_residual(const FullOrderModel& model, const LinearMultistepScheme& scheme,
                         const StateHistory& history, const Vector& xi, int n, const ParamVector& mu) {
  model.check_state(xi, "trial state");
  model.check_params(mu);
  check_history(scheme, history, xi.size());
  require(n >= 1 && n <= scheme.n_steps(), "discrete_residual: step index out of range");
  Vector r = scheme.alpha(0) * xi + history_term(scheme, history);
  if (scheme.beta(0) != 0.0) r.noalias() -= scheme.dt() * scheme.beta(0) * model.velocity(xi, scheme.time(n), mu);
  return r;
}

SparseMatrix discrete_residual_jacobian(const FullOrderModel& model, const LinearMultistepScheme& scheme,
                                        const Vector& xi, int n, const ParamVector& mu) {
  model.check_state(xi, "trial state");
  SparseMatrix id(xi.size(), xi.size());
  id.setIdentity();
  if (scheme.beta(0) == 0.0) return scheme.alpha(0) * id;
  SparseMatrix jac = model.velocity_jacobian(xi, scheme.time(n), mu);
  return scheme.alpha(0) * id - (scheme.dt() * scheme.beta(0)) * jac;
}

AffineVelocityMap discrete_velocity_map(const LinearMultistepScheme& scheme, const StateHistory& history) {
  require(history.size() >= scheme.k(), "insufficient history for the multistep scheme");
  const int q = scheme.q();
  const double denom = scheme.dt() * scheme.beta(q);
  Vector offset = Vector::Zero(history.state(1).size());
  for (int j = 1; j <= scheme.k(); ++j) {
    if (scheme.alpha(j) != 0.0) offset.noalias() += scheme.alpha(j) * history.state(j);
    if (j > q && scheme.beta(j) != 0.0) offset.noalias() -= scheme.dt() * scheme.beta(j) * history.velocity(j);
  }
  return {scheme.alpha(0) / denom, offset / denom};
}

Vector discrete_velocity(const LinearMultistepScheme& scheme, const StateHistory& history, const Vector& xi) {
  check_history(scheme, history, xi.size());
  const AffineVelocityMap map = discrete_velocity_map(scheme, history);
  return map.slope * xi + map.offset;
}

TrajectorySolution solve_fom(const FullOrderModel& model, const LinearMultistepScheme& scheme,
                             const ParamVector& mu, const NewtonOptions& newton,
                             const std::vector<Vector>& startup) {
  model.check_params(mu);
  require(static_cast<int>(startup.size()) >= scheme.k() - 1,
          "solve_fom: schemes with k > 1 need user-provided start-up states");

  TrajectorySolution sol;
  StateHistory history(scheme.k());
  auto accept = [&](Vector x, int n, StepDiagnostics diag) {
    Vector f = model.velocity(x, scheme.time(n), mu);
    sol.times.push_back(scheme.time(n));
    sol.states.push_back(x);
    if (n > 0) sol.diagnostics.push_back(diag);
    history.push(std::move(x), std::move(f));
  };

  accept(model.initial_state(mu), 0, {});
  for (int n = 1; n < scheme.k(); ++n) {
    model.check_state(startup[static_cast<std::size_t>(n - 1)], "start-up state");
    accept(startup[static_cast<std::size_t>(n - 1)], n, {});
  }

  for (int n = scheme.k(); n <= scheme.n_steps(); ++n) {
    if (scheme.is_explicit()) {
      // alpha_0 x^n + history_term = 0
      Vector x = -history_term(scheme, history) / scheme.alpha(0);
      accept(std::move(x), n, {0, 0.0, true});
      continue;
    }
    const ResidualFn residual = [&](const Vector& xi) {
      return discrete_residual(model, scheme, history, xi, n, mu);
    };
    const SparseJacobianFn jacobian = [&](const Vector& xi) {
      return discrete_residual_jacobian(model, scheme, xi, n, mu);
    };
    NewtonResult res = newton_solve(residual, jacobian, history.state(1), newton);
    StepDiagnostics diag{res.iterations, res.residual_norm, res.converged()};
    if (!res.converged()) {
      sol.diagnostics.push_back(diag);
      sol.failed_step = n;
      sol.message = std::string("Newton ") + to_string(res.status) + " at step " + std::to_string(n);
      return sol;
    }
    accept(std::move(res.x), n, diag);
  }
  sol.completed = true;
  return sol;
}

}  // namespace cgrom
