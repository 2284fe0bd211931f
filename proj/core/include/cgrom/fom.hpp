#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cgrom/solvers.hpp"
#include "cgrom/types.hpp"

namespace cgrom {

/// Semi-discrete parameterized ODE  dx/dt = f(x, t; mu),  x(0) = x0(mu).
class FullOrderModel {
 public:
  virtual ~FullOrderModel() = default;

  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual Index dim() const = 0;
  [[nodiscard]] virtual Index param_dim() const = 0;
  [[nodiscard]] virtual double final_time() const = 0;

  [[nodiscard]] virtual Vector velocity(const Vector& x, double t, const ParamVector& mu) const = 0;
  [[nodiscard]] virtual SparseMatrix velocity_jacobian(const Vector& x, double t,
                                                       const ParamVector& mu) const = 0;
  [[nodiscard]] virtual Vector initial_state(const ParamVector& mu) const = 0;

  /// Throws ContractViolation unless mu has param_dim() entries.
  void check_params(const ParamVector& mu) const;
  void check_state(const Vector& x, const char* what) const;
};

/// Model assembled from callables (toy problems, tests).
class FunctionModel final : public FullOrderModel {
 public:
  using VelocityFn = std::function<Vector(const Vector&, double, const ParamVector&)>;
  using JacobianFn = std::function<SparseMatrix(const Vector&, double, const ParamVector&)>;
  using InitialFn = std::function<Vector(const ParamVector&)>;

  FunctionModel(std::string name, Index dim, Index param_dim, double final_time, VelocityFn velocity,
                JacobianFn jacobian, InitialFn initial);

  [[nodiscard]] std::string name() const override { return name_; }
  [[nodiscard]] Index dim() const override { return dim_; }
  [[nodiscard]] Index param_dim() const override { return param_dim_; }
  [[nodiscard]] double final_time() const override { return final_time_; }
  [[nodiscard]] Vector velocity(const Vector& x, double t, const ParamVector& mu) const override;
  [[nodiscard]] SparseMatrix velocity_jacobian(const Vector& x, double t, const ParamVector& mu) const override;
  [[nodiscard]] Vector initial_state(const ParamVector& mu) const override;

 private:
  std::string name_;
  Index dim_;
  Index param_dim_;
  double final_time_;
  VelocityFn velocity_;
  JacobianFn jacobian_;
  InitialFn initial_;
};

/// sum_j alpha_j x^{n-j} = dt sum_j beta_j f(x^{n-j}, t^{n-j}),  j = 0..k.
class LinearMultistepScheme {
 public:
  LinearMultistepScheme(std::vector<double> alpha, std::vector<double> beta, double final_time, int n_steps);

  static LinearMultistepScheme backward_euler(double final_time, int n_steps);
  static LinearMultistepScheme explicit_euler(double final_time, int n_steps);

  [[nodiscard]] int k() const noexcept { return static_cast<int>(alpha_.size()) - 1; }
  [[nodiscard]] double alpha(int j) const { return alpha_.at(static_cast<std::size_t>(j)); }
  [[nodiscard]] double beta(int j) const { return beta_.at(static_cast<std::size_t>(j)); }
  [[nodiscard]] double dt() const noexcept { return dt_; }
  [[nodiscard]] int n_steps() const noexcept { return n_steps_; }
  [[nodiscard]] double final_time() const noexcept { return final_time_; }
  [[nodiscard]] double time(int n) const noexcept { return n * dt_; }
  [[nodiscard]] bool is_explicit() const noexcept { return beta_[0] == 0.0; }
  /// 0 for implicit schemes, 1 for explicit ones.
  [[nodiscard]] int q() const noexcept { return is_explicit() ? 1 : 0; }
  [[nodiscard]] std::string name() const;

 private:
  std::vector<double> alpha_;
  std::vector<double> beta_;
  double final_time_;
  int n_steps_;
  double dt_;
};

/// Last k accepted states, newest first, with their cached velocities.
class StateHistory {
 public:
  explicit StateHistory(int capacity);

  void push(Vector state, Vector velocity);
  [[nodiscard]] int size() const noexcept { return static_cast<int>(states_.size()); }
  [[nodiscard]] int capacity() const noexcept { return capacity_; }
  /// x^{n-j}, j >= 1.
  [[nodiscard]] const Vector& state(int j) const;
  /// f(x^{n-j}, t^{n-j}; mu), j >= 1.
  [[nodiscard]] const Vector& velocity(int j) const;

 private:
  int capacity_;
  std::deque<Vector> states_;
  std::deque<Vector> velocities_;
};

struct StepDiagnostics {
  int iterations = 0;
  double residual_norm = 0.0;
  bool converged = true;
};

struct TrajectorySolution {
  std::vector<double> times;   // t^0 .. t^{N_T} (shorter if the run failed)
  std::vector<Vector> states;  // x^0 .. x^{N_T}
  std::vector<StepDiagnostics> diagnostics;  // entry n-1 belongs to step n
  bool completed = false;
  int failed_step = -1;
  std::string message;

  [[nodiscard]] Matrix as_matrix() const;
};

/// v - f(xi, tau; mu).
Vector continuous_residual(const FullOrderModel& model, const Vector& v, const Vector& xi, double tau,
                           const ParamVector& mu);

/// alpha_0 xi - dt beta_0 f(xi, t^n) + sum_{j>=1} (alpha_j x^{n-j} - dt beta_j f^{n-j}).
Vector discrete_residual(const FullOrderModel& model, const LinearMultistepScheme& scheme,
                         const StateHistory& history, const Vector& xi, int n, const ParamVector& mu);

/// d r^n / d xi = alpha_0 I - dt beta_0 df/dx(xi, t^n).
SparseMatrix discrete_residual_jacobian(const FullOrderModel& model, const LinearMultistepScheme& scheme,
                                        const Vector& xi, int n, const ParamVector& mu);

/// Velocity at t^{n-q} implied by accepting xi as x^n.
Vector discrete_velocity(const LinearMultistepScheme& scheme, const StateHistory& history, const Vector& xi);

/// Velocity-independent part of discrete_velocity: v(xi) = a * xi + offset.
struct AffineVelocityMap {
  double slope = 0.0;
  Vector offset;
};
AffineVelocityMap discrete_velocity_map(const LinearMultistepScheme& scheme, const StateHistory& history);

/// Marches the FOM over all N_T steps.  Schemes with k > 1 need x^1..x^{k-1}
/// in `startup`.  A Newton failure ends the run with completed = false.
TrajectorySolution solve_fom(const FullOrderModel& model, const LinearMultistepScheme& scheme,
                             const ParamVector& mu, const NewtonOptions& newton = {},
                             const std::vector<Vector>& startup = {});

}  // namespace cgrom
