#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cgrom/fom.hpp"

namespace cgrom {

/// Inviscid Burgers equation, first-order upwind finite volumes on [0, L].
/// Cell centres at (i - 1/2) dz; Dirichlet inflow u_b = 2 mu_2 + 1 at z = 0.
class BurgersModel final : public FullOrderModel {
 public:
  explicit BurgersModel(Index cells = 200, double length = 100.0, double final_time = 30.0);

  [[nodiscard]] std::string name() const override { return "burgers"; }
  [[nodiscard]] Index dim() const override { return cells_; }
  [[nodiscard]] Index param_dim() const override { return 2; }
  [[nodiscard]] double final_time() const override { return final_time_; }
  [[nodiscard]] Vector velocity(const Vector& x, double t, const ParamVector& mu) const override;
  [[nodiscard]] SparseMatrix velocity_jacobian(const Vector& x, double t, const ParamVector& mu) const override;
  [[nodiscard]] Vector initial_state(const ParamVector& mu) const override;

  [[nodiscard]] double dz() const noexcept { return length_ / static_cast<double>(cells_); }
  [[nodiscard]] static double inflow(const ParamVector& mu) { return 2.0 * mu[1] + 1.0; }
  [[nodiscard]] static std::vector<ParamVector> training_set();
  [[nodiscard]] static int default_steps() { return 150; }

 private:
  Index cells_;
  double length_;
  double final_time_;
};

/// 1-D Euler equations in (u, p, v) form with first-order backward differences.
/// Unknowns at z_i = i dz, i = 1..nodes; node 0 holds the inflow state.
class EulerModel final : public FullOrderModel {
 public:
  static constexpr double kGamma = 1.4;
  static constexpr double kU0 = 400.0;
  static constexpr double kP0 = 101000.0;

  explicit EulerModel(Index nodes = 100, double length = 1.25, double final_time = 1e-3);

  [[nodiscard]] std::string name() const override { return "euler"; }
  [[nodiscard]] Index dim() const override { return 3 * nodes_; }
  [[nodiscard]] Index param_dim() const override { return 2; }
  [[nodiscard]] double final_time() const override { return final_time_; }
  [[nodiscard]] Vector velocity(const Vector& x, double t, const ParamVector& mu) const override;
  [[nodiscard]] SparseMatrix velocity_jacobian(const Vector& x, double t, const ParamVector& mu) const override;
  [[nodiscard]] Vector initial_state(const ParamVector& mu) const override;

  [[nodiscard]] Index nodes() const noexcept { return nodes_; }
  [[nodiscard]] double dz() const noexcept { return length_ / static_cast<double>(nodes_); }
  /// Inflow triple (u, p, v) at z = 0.
  [[nodiscard]] static Eigen::Vector3d inflow(const ParamVector& mu);
  [[nodiscard]] FieldLayout layout() const;
  [[nodiscard]] static std::vector<ParamVector> training_set();
  [[nodiscard]] static int default_steps() { return 200; }

 private:
  Index nodes_;
  double length_;
  double final_time_;
};

/// Nonlinear heat equation on the unit square with adiabatic walls and two
/// moving point sources, second-order central differences.
/// Node (iy, iz) is stored at index iz * n + iy.
class DiffusionModel final : public FullOrderModel {
 public:
  static constexpr double kRho = 8000.0;
  static constexpr double kHeatCapacity = 500.0;
  static constexpr double kInitialTemperature = 300.0;

  explicit DiffusionModel(Index per_axis = 33, double final_time = 1e4);

  [[nodiscard]] std::string name() const override { return "diffusion"; }
  [[nodiscard]] Index dim() const override { return n_ * n_; }
  [[nodiscard]] Index param_dim() const override { return 4; }
  [[nodiscard]] double final_time() const override { return final_time_; }
  [[nodiscard]] Vector velocity(const Vector& x, double t, const ParamVector& mu) const override;
  [[nodiscard]] SparseMatrix velocity_jacobian(const Vector& x, double t, const ParamVector& mu) const override;
  [[nodiscard]] Vector initial_state(const ParamVector& mu) const override;

  [[nodiscard]] Index per_axis() const noexcept { return n_; }
  [[nodiscard]] double h() const noexcept { return 1.0 / static_cast<double>(n_ - 1); }
  [[nodiscard]] static double conductivity(double theta) { return theta - 250.0; }
  [[nodiscard]] static double rho_c() { return kRho * kHeatCapacity; }

  /// Grid nodes receiving the two sources at time t: {index of mu_1, index of mu_2}.
  [[nodiscard]] std::pair<Index, Index> source_nodes(double t, const ParamVector& mu) const;
  /// Nodal source term before division by rho c.
  [[nodiscard]] Vector source(double t, const ParamVector& mu) const;

  /// E(x) = rho c / N * 1'x.
  [[nodiscard]] double energy(const Vector& x) const;
  /// Energy intake rate in the scaled form 1'dx/dt = (mu_1 + mu_2) / (rho c).
  [[nodiscard]] static double scaled_energy_source(const ParamVector& mu) { return (mu[0] + mu[1]) / rho_c(); }

  [[nodiscard]] static std::vector<ParamVector> training_set();
  [[nodiscard]] static ParamVector online_point() { return {-1e6, 1e6, 1e-4, 0.2}; }
  [[nodiscard]] static int default_steps() { return 100; }
  /// Two overlapping all-ones rows covering [0, 595) and [495, N) on the 33 x 33 grid.
  [[nodiscard]] Matrix rsum_matrix() const;

 private:
  Index n_;
  double final_time_;
};

}  // namespace cgrom
