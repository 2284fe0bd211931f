#include "cgrom/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cgrom/constraints.hpp"

namespace cgrom {

double MetricSeries::max() const {
  return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

double mean_aggregate(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double rms_over_count_aggregate(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s) / static_cast<double>(values.size());
}

double relative_error(const Eigen::Ref<const Vector>& reference, const Eigen::Ref<const Vector>& approx) {
  require(reference.size() == approx.size(), "relative_error: length mismatch");
  const double num = (reference - approx).norm();
  const double den = reference.norm();
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

std::vector<double> field_relative_errors(const Vector& reference, const Vector& approx, const FieldLayout& layout) {
  require(layout.dim() == reference.size(), "field_relative_errors: layout does not cover the state");
  std::vector<double> out;
  for (const auto& f : layout.fields())
    out.push_back(relative_error(reference.segment(f.offset, f.length), approx.segment(f.offset, f.length)));
  return out;
}

std::vector<Vector> decode_trajectory(const ReducedTrajectory& rom, const ReducedBasis& basis, const Vector& x_ref) {
  std::vector<Vector> out;
  out.reserve(rom.coords.size());
  for (const auto& xh : rom.coords) out.push_back(decode(basis, x_ref, xh));
  return out;
}

MetricSeries state_error_series(const TrajectorySolution& fom, const ReducedTrajectory& rom, const ReducedBasis& basis,
                                const Vector& x_ref) {
  MetricSeries s{"state_error", {}, 0.0};
  const std::size_t steps = std::min(fom.states.size(), rom.coords.size());
  double num = 0.0;
  double den = 0.0;
  for (std::size_t n = 1; n < steps; ++n) {
    const Vector approx = decode(basis, x_ref, rom.coords[n]);
    const double e2 = (fom.states[n] - approx).squaredNorm();
    const double x2 = fom.states[n].squaredNorm();
    s.values.push_back(relative_error(fom.states[n], approx));
    num += e2;
    den += x2;
  }
  s.global = den > 0.0 ? std::sqrt(num / den) : 0.0;
  return s;
}

MetricSeries rsum_violation_series(ProjectionKind kind, const FullOrderModel& model, const RomConfig& config,
                                   const ReducedTrajectory& rom, const Matrix& c, const ParamVector& mu) {
  require(c.cols() == model.dim(), "rsum_violation_series: C has the wrong column count");
  MetricSeries s{"rsum", {}, 0.0};
  const Vector x_ref = config.x_ref(mu);
  const std::vector<Vector> states = decode_trajectory(rom, config.basis, x_ref);
  const LinearMultistepScheme& scheme = config.scheme;

  if (kind == ProjectionKind::galerkin) {
    std::optional<Vector> warm;
    for (std::size_t n = 1; n < states.size(); ++n) {
      const double t = scheme.time(static_cast<int>(n));
      Vector fhat;
      if (rom.velocities.size() > n) {
        fhat = rom.velocities[n];
      } else if (config.constraints.empty()) {
        fhat = galerkin_velocity(model, config, rom.coords[n], t, mu);
      } else {
        const NlpResult r = constrained_galerkin_velocity(model, config, rom.coords[n], t, mu, warm);
        fhat = r.point;
        warm = r.point;
      }
      const Vector res = continuous_residual(model, config.basis.phi() * fhat, states[n], t, mu);
      s.values.push_back((c * res).norm());
    }
  } else {
    StateHistory history(scheme.k());
    for (std::size_t n = 0; n < states.size(); ++n) {
      const int step = static_cast<int>(n);
      if (n >= static_cast<std::size_t>(scheme.k())) {
        const Vector r = discrete_residual(model, scheme, history, states[n], step, mu);
        s.values.push_back((c * r).norm());
      }
      history.push(states[n], model.velocity(states[n], scheme.time(step), mu));
    }
  }
  s.global = rms_over_count_aggregate(s.values);
  return s;
}

MetricSeries tv_violation_series(const ReducedTrajectory& rom, const ReducedBasis& basis, const Vector& x_ref) {
  MetricSeries s{"tv", {}, 0.0};
  double prev = 0.0;
  for (std::size_t n = 0; n < rom.coords.size(); ++n) {
    const double tv = total_variation(decode(basis, x_ref, rom.coords[n]));
    if (n > 0) s.values.push_back(std::max(0.0, tv - prev));
    prev = tv;
  }
  s.global = mean_aggregate(s.values);
  return s;
}

std::vector<MetricSeries> tvb_violation_series(const ReducedTrajectory& rom, const ReducedBasis& basis,
                                               const Vector& x_ref, const std::vector<double>& bounds,
                                               const FieldLayout& layout) {
  require(bounds.size() == layout.size(), "tvb_violation_series: one bound per field is required");
  require(layout.dim() == basis.n(), "tvb_violation_series: layout does not cover the state");
  std::vector<MetricSeries> out;
  for (const auto& f : layout.fields()) out.push_back({"tvb_" + f.name, {}, 0.0});
  MetricSeries worst{"tvb_max", {}, 0.0};
  for (std::size_t n = 1; n < rom.coords.size(); ++n) {
    const Vector x = decode(basis, x_ref, rom.coords[n]);
    double m = 0.0;
    for (std::size_t k = 0; k < layout.size(); ++k) {
      const auto& f = layout[k];
      const double v = std::max(0.0, -tvb_value(x.segment(f.offset, f.length), bounds[k]));
      out[k].values.push_back(v);
      m = std::max(m, v);
    }
    worst.values.push_back(m);
  }
  for (auto& series : out) series.global = mean_aggregate(series.values);
  worst.global = mean_aggregate(worst.values);
  out.push_back(std::move(worst));
  return out;
}

MetricSeries energy_deviation_series(const ReducedTrajectory& rom, const ReducedBasis& basis, const Vector& x_ref,
                                     const EnergyFn& energy, const Vector& x0) {
  MetricSeries s{"energy_deviation", {}, 0.0};
  const double e0 = energy(x0);
  for (std::size_t n = 1; n < rom.coords.size(); ++n)
    s.values.push_back(std::abs(energy(decode(basis, x_ref, rom.coords[n])) - e0));
  s.global = mean_aggregate(s.values);
  return s;
}

}  // namespace cgrom
