#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cgrom/basis.hpp"
#include "cgrom/constraints.hpp"
#include "cgrom/fom.hpp"
#include "cgrom/solvers.hpp"

namespace cgrom {

enum class ProjectionKind { galerkin, lspg };

[[nodiscard]] const char* to_string(ProjectionKind kind);
[[nodiscard]] ProjectionKind parse_projection_kind(const std::string& text);

struct RomConfig {
  ReducedBasis basis;
  ReferenceState x_ref;
  LinearMultistepScheme scheme;
  ConstraintSet constraints;
  ProjectionKind kind = ProjectionKind::galerkin;
  /// Per-step NLP (constrained Galerkin velocity, constrained LSPG step);
  /// also supplies gtol / max_iter to the unconstrained Gauss-Newton solver.
  SolverOptions solver;
  /// Outer root finder of the implicit constrained Galerkin step.
  HybridOptions hybrid;
  /// Stopping rule of the unconstrained implicit Galerkin Newton and LSPG Gauss-Newton loops.
  NewtonOptions newton;

  void validate(const FullOrderModel& model) const;
};

struct RomStepDiagnostics {
  int iterations = 0;        // Newton / Gauss-Newton / SQP iterations or root-finder evaluations
  int inner_solves = 0;      // constrained velocity solves (Galerkin)
  int max_inner_iterations = 0;
  std::string status = "ok";
  double objective = 0.0;    // NLP objective at the accepted point (0 when unused)
  double kkt_stationarity = 0.0;
  double kkt_feasibility_eq = 0.0;
  double kkt_feasibility_ineq = 0.0;
  double kkt_complementarity = 0.0;
  double root_residual = 0.0;  // ||reduced step residual|| (implicit Galerkin)
  int active_constraints = 0;  // active Galerkin kinematic rows, or binding LSPG inequalities
};

struct ReducedTrajectory {
  std::vector<double> times;
  std::vector<Vector> coords;      // xhat^0 .. xhat^{N_T}
  std::vector<Vector> velocities;  // Galerkin fhat(xhat^n, t^n); empty for LSPG
  std::vector<RomStepDiagnostics> diagnostics;  // entry n-1 belongs to step n
  bool completed = false;
  int failed_step = -1;
  std::string message;

  [[nodiscard]] Matrix as_matrix() const;
};

/// Raised inside a time step when the configured solver cannot produce an
/// acceptable iterate; simulate_rom turns it into a partial trajectory.
class StepFailure : public NumericalFailure {
 public:
  StepFailure(const std::string& what, RomStepDiagnostics diagnostics)
      : NumericalFailure(what), diagnostics_(std::move(diagnostics)) {}
  [[nodiscard]] const RomStepDiagnostics& diagnostics() const noexcept { return diagnostics_; }

 private:
  RomStepDiagnostics diagnostics_;
};

/// Phi' f(x_ref + Phi xhat, t; mu).
Vector galerkin_velocity(const FullOrderModel& model, const RomConfig& config, const Vector& xhat, double t,
                         const ParamVector& mu);

/// min 1/2 ||Phi vhat - f(xtilde, t)||^2 subject to the Galerkin constraint set at xtilde.
NlpResult constrained_galerkin_velocity(const FullOrderModel& model, const RomConfig& config, const Vector& xhat,
                                        double t, const ParamVector& mu,
                                        const std::optional<Vector>& warm_start = std::nullopt);

/// Mutable per-run state shared by the step functions.
struct RomState {
  ParamVector mu;
  Vector x_ref;
  StateHistory reduced;  // xhat^{n-j} with fhat^{n-j} (Galerkin) or zeros (LSPG)
  StateHistory full;     // decoded states with f(x^{n-j}, t^{n-j})
  std::optional<Vector> inner_warm_start;

  RomState(const FullOrderModel& model, const RomConfig& config, ParamVector mu);
};

struct StepResult {
  Vector xhat;
  Vector fhat;  // Galerkin only
  RomStepDiagnostics diagnostics;
};

StepResult galerkin_step(const FullOrderModel& model, const RomConfig& config, RomState& state, int n);
StepResult lspg_step_unconstrained(const FullOrderModel& model, const RomConfig& config, RomState& state, int n);
StepResult lspg_step_constrained(const FullOrderModel& model, const RomConfig& config, RomState& state, int n);

/// xhat^0 = Phi'(x0 - x_ref), then N_T steps of the configured projection.
/// The first failing step ends the run with completed = false.
ReducedTrajectory simulate_rom(const FullOrderModel& model, const RomConfig& config, const ParamVector& mu);

}  // namespace cgrom
