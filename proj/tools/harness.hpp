#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cgrom/basis.hpp"
#include "cgrom/constraints.hpp"
#include "cgrom/metrics.hpp"
#include "cgrom/models.hpp"
#include "cgrom/projection.hpp"

namespace cgrom::harness {

/// Bad configuration file or value; the message names the offending key path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rows of the rsum matrix C.  `model` uses the model default (Burgers: one
/// all-ones row, diffusion: two overlapping halves), `ones` a single all-ones
/// row, `rows` one all-ones row per [begin, end) range.
struct RsumSpec {
  enum class Kind { model, ones, rows };
  Kind kind = Kind::model;
  std::vector<std::pair<Index, Index>> ranges;
};

struct ConstraintSpec {
  std::optional<RsumSpec> rsum;
  bool tvd = false;
  std::optional<double> tvb_factor;  // bound = factor * max training TV, per field
  bool ec = false;

  /// Declared constraint names in the fixed order rsum, tvd, tvb, ec.
  [[nodiscard]] std::vector<std::string> declared() const;
};

struct SnapshotStudyConfig {
  ParamVector basis_mu{1.1, 1.1};
  Index basis_size = 20;
  ParamVector snapshot_mu{1.6, 1.4};
  int snapshot_step = 200;
  double bound_factor = 1.5;
};

enum class ReferencePolicy { initial, zero };

struct ExperimentConfig {
  std::string model;
  std::optional<Index> model_size;  // cells / nodes / nodes per axis
  std::optional<double> final_time;
  std::string scheme;  // backward_euler | explicit_euler
  int steps = 0;
  std::vector<ParamVector> training;
  Index basis_size = 1;
  ReferencePolicy reference = ReferencePolicy::initial;
  std::vector<ProjectionKind> projections;
  ConstraintSpec constraints;
  /// Each entry lists the constraints switched on for one run.
  std::vector<std::vector<std::string>> combinations;
  std::vector<ParamVector> online;
  SolverOptions solver;
  NewtonOptions newton;
  HybridOptions hybrid;
  std::vector<Index> sweep_sizes;
  SnapshotStudyConfig snapshot;
  std::string output;
  std::uint64_t seed = 0;  // reserved, unused by the numerics
};

/// Strict JSON reader: unknown keys, wrong types and inconsistent toggles are rejected.
[[nodiscard]] ExperimentConfig parse_config_text(const std::string& text);
[[nodiscard]] ExperimentConfig parse_config(const std::string& path);

/// Model, scheme and constraint objects built from a configuration.
struct Setup {
  std::shared_ptr<const FullOrderModel> model;
  LinearMultistepScheme scheme;
  FieldLayout layout;
  std::optional<Matrix> rsum_matrix;
  bool tv_metric = false;   // scalar TV violation series
  bool energy_metric = false;
};

[[nodiscard]] Setup make_setup(const ExperimentConfig& config);
[[nodiscard]] ReferenceState make_reference(const ExperimentConfig& config, const Setup& setup);
/// The constraint set of one combination; tvb needs the per-field bounds.
[[nodiscard]] ConstraintSet make_constraints(const ExperimentConfig& config, const Setup& setup,
                                             const std::vector<std::string>& combination,
                                             const std::vector<double>& tvb_bounds);
/// "rsum0_tvd1" style label; "none" when nothing is declared.
[[nodiscard]] std::string combination_label(const ConstraintSpec& spec, const std::vector<std::string>& combination);

struct RunRecord {
  std::string directory;
  ParamVector mu;
  ProjectionKind projection = ProjectionKind::galerkin;
  std::string combination;
  Index basis_size = 0;
  bool completed = false;
  int failed_step = -1;
  std::string message;
  std::vector<MetricSeries> metrics;
};

struct RunArtifacts {
  std::vector<std::string> files;
  std::vector<RunRecord> runs;
  bool all_completed = true;
};

/// FOM trajectories at the online points.
RunArtifacts run_fom(const ExperimentConfig& config);
/// Training FOM runs, POD basis and training TV maxima written to the output directory.
RunArtifacts run_offline(const ExperimentConfig& config);
/// ROM runs for every online point, projection and combination with the stored basis.
RunArtifacts run_online(const ExperimentConfig& config);
/// run_online for each basis size in sweep_sizes (the stored basis must be large enough).
RunArtifacts run_sweep(const ExperimentConfig& config);
/// Orthogonal vs tvb-constrained projection of one Euler snapshot onto a single-run basis.
RunArtifacts run_snapshot_projection_study(const ExperimentConfig& config);

}  // namespace cgrom::harness
