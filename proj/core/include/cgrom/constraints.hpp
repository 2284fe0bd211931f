#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cgrom/basis.hpp"
#include "cgrom/fom.hpp"
#include "cgrom/types.hpp"

namespace cgrom {

// ---------------------------------------------------------------------------
// Scalar building blocks

/// sum_i |x_{i+1} - x_i|.
[[nodiscard]] double total_variation(const Eigen::Ref<const Vector>& x);
/// D' sgn(D x) with sgn(0) = 0: a (sub)gradient of total_variation.
[[nodiscard]] Vector total_variation_gradient(const Eigen::Ref<const Vector>& x);
/// -sum_i sgn(x_{i+1} - x_i) (xdot_{i+1} - xdot_i); >= 0 when TV is not growing.
[[nodiscard]] double tvd_value(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& xdot);
/// b - TV(x); >= 0 when the bound holds.
[[nodiscard]] double tvb_value(const Eigen::Ref<const Vector>& x, double bound);

using EnergyGradientFn = std::function<Vector(const Vector&)>;
using EnergySourceFn = std::function<double(double, const ParamVector&)>;

/// dE/dx(x)' xdot - S(tau; mu).
[[nodiscard]] double ec_value(const EnergyGradientFn& energy_gradient, const Vector& xdot,
                              const EnergySourceFn& source, const Vector& x, double tau, const ParamVector& mu);

// ---------------------------------------------------------------------------
// Constraint templates

/// Value and derivatives of a state-only constraint cbar(x, t).
struct KinematicEval {
  Vector value;
  Matrix d_state;  // rows x N
  Vector d_time;   // rows
};

/// Value and derivatives of a velocity constraint c(v, x, t).
struct DynamicEval {
  Vector value;
  Matrix d_velocity;  // rows x N
  Matrix d_state;     // rows x N, only filled when requested
};

class KinematicConstraint {
 public:
  virtual ~KinematicConstraint() = default;
  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual Index rows() const = 0;
  [[nodiscard]] virtual KinematicEval evaluate(const Vector& x, double t, const ParamVector& mu) const = 0;
  /// Concave in x (each linearization over-estimates the value).
  [[nodiscard]] virtual bool concave() const { return false; }
};

class DynamicConstraint {
 public:
  virtual ~DynamicConstraint() = default;
  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual Index rows() const = 0;
  [[nodiscard]] virtual DynamicEval evaluate(const Vector& v, const Vector& x, double t, const ParamVector& mu,
                                             bool want_state_derivative) const = 0;
  /// Affine in v for fixed x.
  [[nodiscard]] virtual bool linear_in_velocity() const { return false; }
};

/// C (v - f(x, t; mu)): selected sums of residual entries.
class RsumConstraint final : public DynamicConstraint {
 public:
  RsumConstraint(std::shared_ptr<const FullOrderModel> model, Matrix c);
  [[nodiscard]] std::string name() const override { return "rsum"; }
  [[nodiscard]] Index rows() const override { return c_.rows(); }
  [[nodiscard]] DynamicEval evaluate(const Vector& v, const Vector& x, double t, const ParamVector& mu,
                                     bool want_state_derivative) const override;
  [[nodiscard]] bool linear_in_velocity() const override { return true; }
  [[nodiscard]] const Matrix& matrix() const noexcept { return c_; }

 private:
  std::shared_ptr<const FullOrderModel> model_;
  Matrix c_;
};

/// One row per field: tvd_value(x_f, v_f) with the sign pattern frozen at x.
class TvdConstraint final : public DynamicConstraint {
 public:
  explicit TvdConstraint(FieldLayout layout);
  [[nodiscard]] std::string name() const override { return "tvd"; }
  [[nodiscard]] Index rows() const override { return static_cast<Index>(layout_.size()); }
  [[nodiscard]] DynamicEval evaluate(const Vector& v, const Vector& x, double t, const ParamVector& mu,
                                     bool want_state_derivative) const override;
  [[nodiscard]] bool linear_in_velocity() const override { return true; }

 private:
  FieldLayout layout_;
};

/// One row per field: b_f - TV(x_f).
class TvbConstraint final : public KinematicConstraint {
 public:
  TvbConstraint(FieldLayout layout, std::vector<double> bounds);
  [[nodiscard]] std::string name() const override { return "tvb"; }
  [[nodiscard]] Index rows() const override { return static_cast<Index>(layout_.size()); }
  [[nodiscard]] KinematicEval evaluate(const Vector& x, double t, const ParamVector& mu) const override;
  [[nodiscard]] bool concave() const override { return true; }
  [[nodiscard]] const std::vector<double>& bounds() const noexcept { return bounds_; }
  [[nodiscard]] const FieldLayout& layout() const noexcept { return layout_; }

 private:
  FieldLayout layout_;
  std::vector<double> bounds_;
};

/// dE/dx(x)' v - S(t; mu).  The optional Hessian supplies d/dx of the first term.
class EnergyConstraint final : public DynamicConstraint {
 public:
  using HessianFn = std::function<Matrix(const Vector&)>;
  EnergyConstraint(EnergyGradientFn gradient, EnergySourceFn source, HessianFn hessian = {});
  [[nodiscard]] std::string name() const override { return "ec"; }
  [[nodiscard]] Index rows() const override { return 1; }
  [[nodiscard]] DynamicEval evaluate(const Vector& v, const Vector& x, double t, const ParamVector& mu,
                                     bool want_state_derivative) const override;
  [[nodiscard]] bool linear_in_velocity() const override { return true; }

 private:
  EnergyGradientFn gradient_;
  EnergySourceFn source_;
  HessianFn hessian_;
};

/// The four constraint families.  Equalities are = 0, inequalities >= 0.
struct ConstraintSet {
  std::vector<std::shared_ptr<const KinematicConstraint>> kin_eq;
  std::vector<std::shared_ptr<const DynamicConstraint>> dyn_eq;
  std::vector<std::shared_ptr<const KinematicConstraint>> kin_ineq;
  std::vector<std::shared_ptr<const DynamicConstraint>> dyn_ineq;
  /// Galerkin kinematic inequalities are imposed only where dbar(x) <= activation_tol.
  double activation_tol = 0.0;

  [[nodiscard]] bool empty() const;
  [[nodiscard]] Index kin_eq_rows() const;
  [[nodiscard]] Index dyn_eq_rows() const;
  [[nodiscard]] Index kin_ineq_rows() const;
  [[nodiscard]] Index dyn_ineq_rows() const;
  [[nodiscard]] std::string describe() const;
};

/// Constraint values and Jacobians with respect to a reduced variable.
struct ConstraintBlock {
  Vector value;
  Matrix jacobian;  // rows x p
};

struct GalerkinConstraintEval {
  ConstraintBlock kin_eq;
  ConstraintBlock dyn_eq;
  ConstraintBlock kin_ineq;  // all rows; see active
  ConstraintBlock dyn_ineq;
  Vector kin_ineq_state_value;  // dbar(xtilde), drives activation
  std::vector<bool> active;     // per kin_ineq row

  /// [kin_eq; dyn_eq].
  [[nodiscard]] ConstraintBlock equalities() const;
  /// [active kin_ineq rows; dyn_ineq].
  [[nodiscard]] ConstraintBlock inequalities() const;
  [[nodiscard]] Index active_count() const;
};

struct LspgConstraintEval {
  ConstraintBlock kin_eq;
  ConstraintBlock dyn_eq;
  ConstraintBlock kin_ineq;
  ConstraintBlock dyn_ineq;

  [[nodiscard]] ConstraintBlock equalities() const;
  [[nodiscard]] ConstraintBlock inequalities() const;
};

/// Galerkin form at velocity vhat and state xtilde = x_ref + Phi xhat:
///   cbar_G = dcbar/dx Phi vhat + dcbar/dt,  c_G = c(Phi vhat, xtilde, tau).
GalerkinConstraintEval eval_galerkin_constraints(const ConstraintSet& set, const ReducedBasis& basis,
                                                 const Vector& x_ref, const Vector& vhat, const Vector& xhat,
                                                 double tau, const ParamVector& mu);

/// LSPG form at xi = x_ref + Phi xihat for step n.  Dynamic families use the
/// discrete velocity vbar^{n-q}(xi) at the state x^{n-q} and time t^{n-q}.
/// `history` holds decoded full states with their cached velocities.
LspgConstraintEval eval_lspg_constraints(const ConstraintSet& set, const ReducedBasis& basis, const Vector& x_ref,
                                         const LinearMultistepScheme& scheme, const StateHistory& history,
                                         const Vector& xihat, int n, const ParamVector& mu);

}  // namespace cgrom
