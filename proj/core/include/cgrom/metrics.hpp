#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cgrom/basis.hpp"
#include "cgrom/fom.hpp"
#include "cgrom/projection.hpp"
#include "cgrom/types.hpp"

namespace cgrom {

/// Per-step values for n = 1..N_T (shorter for failed runs) and the global aggregate.
struct MetricSeries {
  std::string name;
  std::vector<double> values;
  double global = 0.0;

  [[nodiscard]] double max() const;
};

/// Aggregates used by the violation metrics.
[[nodiscard]] double mean_aggregate(const std::vector<double>& values);
/// (1/N) sqrt(sum e_n^2).
[[nodiscard]] double rms_over_count_aggregate(const std::vector<double>& values);

/// ||a - b|| / ||a||; 0 when both vanish.
[[nodiscard]] double relative_error(const Eigen::Ref<const Vector>& reference, const Eigen::Ref<const Vector>& approx);
/// relative_error restricted to each field.
[[nodiscard]] std::vector<double> field_relative_errors(const Vector& reference, const Vector& approx,
                                                        const FieldLayout& layout);

/// Decoded states x_ref + Phi xhat^n for every stored step (n = 0 included).
[[nodiscard]] std::vector<Vector> decode_trajectory(const ReducedTrajectory& rom, const ReducedBasis& basis,
                                                    const Vector& x_ref);

/// ||x^n - xtilde^n|| / ||x^n||; global sqrt(sum ||x^n - xtilde^n||^2 / sum ||x^n||^2).
[[nodiscard]] MetricSeries state_error_series(const TrajectorySolution& fom, const ReducedTrajectory& rom,
                                              const ReducedBasis& basis, const Vector& x_ref);

/// Galerkin: ||C (Phi fhat(xhat^n, t^n) - f(xtilde^n, t^n))||; LSPG: ||C r^n(xtilde^n)||.
/// Galerkin velocities come from the trajectory when present, else the configured
/// velocity map is re-evaluated.
[[nodiscard]] MetricSeries rsum_violation_series(ProjectionKind kind, const FullOrderModel& model,
                                                 const RomConfig& config, const ReducedTrajectory& rom,
                                                 const Matrix& c, const ParamVector& mu);

/// max(0, TV(xtilde^n) - TV(xtilde^{n-1})) over the whole state.
[[nodiscard]] MetricSeries tv_violation_series(const ReducedTrajectory& rom, const ReducedBasis& basis,
                                               const Vector& x_ref);

/// One series per field, max(0, TV(field) - b_f), followed by the per-step maximum over fields.
[[nodiscard]] std::vector<MetricSeries> tvb_violation_series(const ReducedTrajectory& rom, const ReducedBasis& basis,
                                                             const Vector& x_ref, const std::vector<double>& bounds,
                                                             const FieldLayout& layout);

using EnergyFn = std::function<double(const Vector&)>;

/// |E(xtilde^n) - E(x^0)|.
[[nodiscard]] MetricSeries energy_deviation_series(const ReducedTrajectory& rom, const ReducedBasis& basis,
                                                   const Vector& x_ref, const EnergyFn& energy, const Vector& x0);

}  // namespace cgrom
