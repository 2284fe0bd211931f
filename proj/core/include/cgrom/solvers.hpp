#pragma once

// Nonlinear kernels used by the full- and reduced-order time steppers:
//   * newton_solve  - Newton's method with an analytic Jacobian
//   * hybrid_root   - derivative-free Powell hybrid (Broyden + dogleg)
//   * solve_qp      - dense strictly convex QP (Goldfarb-Idnani dual active set)
//   * solve_nlp     - SQP for equality/inequality constrained problems

#include <functional>
#include <optional>
#include <string>

#include "cgrom/types.hpp"

namespace cgrom {

// ---------------------------------------------------------------------------
// Newton

struct NewtonOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-6;
  int max_iter = 25;
};

enum class NewtonStatus { converged, max_iter, singular_jacobian };

struct NewtonResult {
  Vector x;
  NewtonStatus status = NewtonStatus::max_iter;
  int iterations = 0;
  double residual_norm = 0.0;
  double initial_residual_norm = 0.0;

  [[nodiscard]] bool converged() const { return status == NewtonStatus::converged; }
};

[[nodiscard]] const char* to_string(NewtonStatus status);

using ResidualFn = std::function<Vector(const Vector&)>;
using DenseJacobianFn = std::function<Matrix(const Vector&)>;
using SparseJacobianFn = std::function<SparseMatrix(const Vector&)>;

/// Terminates when ||F(x)|| < abs_tol or ||F(x)|| / ||F(x_init)|| < rel_tol.
/// On non-convergence the last iterate is returned together with the status.
NewtonResult newton_solve(const ResidualFn& residual, const DenseJacobianFn& jacobian,
                          Vector x_init, const NewtonOptions& options = {});
NewtonResult newton_solve(const ResidualFn& residual, const SparseJacobianFn& jacobian,
                          Vector x_init, const NewtonOptions& options = {});

// ---------------------------------------------------------------------------
// Powell hybrid root finder

struct HybridOptions {
  int maxfev = 100;
  double xtol = 1e-6;
  double factor = 100.0;  // initial trust-region radius factor
};

enum class HybridStatus { converged, maxfev, xtol_too_small, not_making_progress };

struct HybridResult {
  Vector x;
  Vector fvec;
  HybridStatus status = HybridStatus::not_making_progress;
  int nfev = 0;
  int jacobian_evals = 0;

  [[nodiscard]] bool converged() const { return status == HybridStatus::converged; }
};

[[nodiscard]] const char* to_string(HybridStatus status);

/// MINPACK-style hybrd: forward-difference initial Jacobian, rank-one
/// Broyden updates, dogleg trust-region steps in scaled variables.
/// Converges when the trust radius falls below xtol * ||D x||.
HybridResult hybrid_root(const ResidualFn& residual, Vector x_init, const HybridOptions& options = {});

// ---------------------------------------------------------------------------
// Dense QP:  min 1/2 d'Hd + g'd  s.t.  A_eq d + b_eq = 0,  A_in d + b_in >= 0

enum class QpStatus { optimal, infeasible, degenerate };

struct QpResult {
  Vector x;
  Vector multipliers_eq;
  Vector multipliers_ineq;  // >= 0, zero for inactive rows
  QpStatus status = QpStatus::infeasible;
  double objective = 0.0;
};

/// H must be symmetric positive definite.  Ties in the choice of the next
/// violated inequality resolve to the lowest row index.
QpResult solve_qp(const Matrix& hessian, const Vector& gradient, const Matrix& a_eq, const Vector& b_eq,
                  const Matrix& a_ineq, const Vector& b_ineq);

// ---------------------------------------------------------------------------
// Nonlinear programs

/// Objective and constraint values at a point.
struct NlpValues {
  double objective = 0.0;
  Vector eq;
  Vector ineq;  // feasible when >= 0
};

struct NlpDerivatives {
  Vector gradient;
  Matrix eq_jacobian;    // n_eq x dim
  Matrix ineq_jacobian;  // n_ineq x dim
  /// Optional objective Hessian (or Gauss-Newton approximation); when absent
  /// the solver maintains a damped BFGS approximation of the Lagrangian Hessian.
  std::optional<Matrix> hessian;
};

/// min f(x)  s.t.  c(x) = 0,  g(x) >= 0.
class NlpProblem {
 public:
  virtual ~NlpProblem() = default;
  [[nodiscard]] virtual Index dim() const = 0;
  [[nodiscard]] virtual Index n_eq() const { return 0; }
  [[nodiscard]] virtual Index n_ineq() const { return 0; }
  [[nodiscard]] virtual NlpValues values(const Vector& x) const = 0;
  [[nodiscard]] virtual NlpDerivatives derivatives(const Vector& x) const = 0;
  /// True when the objective is convex quadratic (its Hessian is exact), the
  /// equalities are affine and every inequality g_i is concave, possibly
  /// nonsmooth.  solve_nlp then keeps each inequality linearization as a cut.
  [[nodiscard]] virtual bool convex() const { return false; }
};

/// NlpProblem assembled from callables; convenient for small problems and tests.
class FunctionNlp final : public NlpProblem {
 public:
  using ScalarFn = std::function<double(const Vector&)>;
  using VectorFn = std::function<Vector(const Vector&)>;
  using MatrixFn = std::function<Matrix(const Vector&)>;

  FunctionNlp(Index dim, ScalarFn objective, VectorFn gradient);

  FunctionNlp& equalities(Index count, VectorFn values, MatrixFn jacobian);
  FunctionNlp& inequalities(Index count, VectorFn values, MatrixFn jacobian);
  FunctionNlp& hessian(MatrixFn hessian);
  FunctionNlp& convex(bool flag);

  [[nodiscard]] Index dim() const override { return dim_; }
  [[nodiscard]] Index n_eq() const override { return n_eq_; }
  [[nodiscard]] Index n_ineq() const override { return n_ineq_; }
  [[nodiscard]] NlpValues values(const Vector& x) const override;
  [[nodiscard]] NlpDerivatives derivatives(const Vector& x) const override;
  [[nodiscard]] bool convex() const override { return convex_; }

 private:
  Index dim_;
  ScalarFn objective_;
  VectorFn gradient_;
  Index n_eq_ = 0;
  VectorFn eq_;
  MatrixFn eq_jacobian_;
  Index n_ineq_ = 0;
  VectorFn ineq_;
  MatrixFn ineq_jacobian_;
  MatrixFn hessian_;
  bool convex_ = false;
};

struct SolverOptions {
  int max_iter = 100;
  double ftol = 1e-10;           // relative objective change for the SLSQP-style stop
  double gtol = 1e-6;            // scaled stationarity tolerance
  double xtol = 1e-10;           // relative step tolerance
  double constraint_tol = 1e-10; // absolute feasibility / complementarity tolerance
  std::optional<Vector> warm_start;

  void validate() const;
};

/// converged:   all KKT residuals within tolerance at the returned point.
/// acceptable:  feasible, but the iteration stalled (objective change below
///              ftol or step below xtol) before stationarity reached gtol;
///              typical at kinks of piecewise-smooth constraints.
enum class NlpStatus { converged, acceptable, max_iter, infeasible_detected };

[[nodiscard]] const char* to_string(NlpStatus status);

struct NlpResult {
  Vector point;
  Vector multipliers_eq;
  Vector multipliers_ineq;
  double objective = 0.0;
  /// ||grad f - J_eq' lambda - J_in' mu||_inf divided by
  /// max(1, ||grad f||_inf, ||J_eq' lambda||_inf, ||J_in' mu||_inf).
  double kkt_stationarity = 0.0;
  double kkt_feasibility_eq = 0.0;    // ||c||_inf
  double kkt_feasibility_ineq = 0.0;  // max(0, -min g)
  double kkt_complementarity = 0.0;   // ||mu o g||_inf
  NlpStatus status = NlpStatus::max_iter;
  int iterations = 0;

  [[nodiscard]] bool usable() const {
    return status == NlpStatus::converged || status == NlpStatus::acceptable;
  }
};

/// SQP with an l1 merit line search.  The QP subproblem is solved exactly;
/// inconsistent linearizations fall back to an elastic (relaxed) subproblem.
/// Problems flagged convex() are solved by outer approximation instead: every
/// inequality linearization is kept as a cut and full QP steps are taken.
NlpResult solve_nlp(const NlpProblem& problem, const SolverOptions& options);

}  // namespace cgrom
