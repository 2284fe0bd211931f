#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cgrom/fom.hpp"
#include "cgrom/solvers.hpp"
#include "cgrom/types.hpp"

namespace cgrom {

/// Centred snapshots, one column per accepted time step and training run.
class SnapshotMatrix {
 public:
  SnapshotMatrix() = default;

  /// Appends x^1 - x_ref .. x^{N_T} - x_ref (x^0 is skipped).
  void append_run(const TrajectorySolution& run, const Vector& x_ref);
  void append_column(const Vector& column);

  [[nodiscard]] Index rows() const noexcept { return data_.rows(); }
  [[nodiscard]] Index cols() const noexcept { return data_.cols(); }
  [[nodiscard]] const Matrix& data() const noexcept { return data_; }

 private:
  Matrix data_;
};

/// N x p matrix with orthonormal columns.
class ReducedBasis {
 public:
  ReducedBasis() = default;
  /// Validates orthonormality (max |Phi'Phi - I| <= 1e-10).
  explicit ReducedBasis(Matrix phi, Vector singular_values = {});

  static ReducedBasis identity(Index n);

  [[nodiscard]] const Matrix& phi() const noexcept { return phi_; }
  [[nodiscard]] Index n() const noexcept { return phi_.rows(); }
  [[nodiscard]] Index p() const noexcept { return phi_.cols(); }
  /// Singular values of the snapshot matrix when built by pod(), else empty.
  [[nodiscard]] const Vector& singular_values() const noexcept { return sigma_; }
  /// First q columns.
  [[nodiscard]] ReducedBasis truncate(Index q) const;
  [[nodiscard]] double orthonormality_error() const;

 private:
  Matrix phi_;
  Vector sigma_;
};

/// x_ref(mu).
class ReferenceState {
 public:
  using Fn = std::function<Vector(const ParamVector&)>;

  explicit ReferenceState(Fn fn, std::string name = "custom");
  static ReferenceState initial_condition(std::shared_ptr<const FullOrderModel> model);
  static ReferenceState zero(Index dim);

  [[nodiscard]] Vector operator()(const ParamVector& mu) const { return fn_(mu); }
  [[nodiscard]] const std::string& name() const noexcept { return name_; }

 private:
  Fn fn_;
  std::string name_;
};

/// Singular values below this fraction of the largest count as rank deficient.
inline constexpr double kPodRankTolerance = 1e-12;

[[nodiscard]] Vector snapshot_singular_values(const SnapshotMatrix& snapshots);

/// First p left singular vectors, largest-magnitude entry of each column made positive.
[[nodiscard]] ReducedBasis pod(const SnapshotMatrix& snapshots, Index p);

[[nodiscard]] Vector encode(const ReducedBasis& basis, const Vector& x_ref, const Vector& x);
[[nodiscard]] Vector decode(const ReducedBasis& basis, const Vector& x_ref, const Vector& xhat);
[[nodiscard]] Vector encode(const ReducedBasis& basis, const ReferenceState& ref, const Vector& x,
                            const ParamVector& mu);
[[nodiscard]] Vector decode(const ReducedBasis& basis, const ReferenceState& ref, const Vector& xhat,
                            const ParamVector& mu);

/// min 1/2 ||Phi xhat + x_ref - x||^2  s.t.  TV(field_f(x_ref + Phi xhat)) <= bounds[f].
/// Starts from the orthogonal projection.
[[nodiscard]] NlpResult project_snapshot_constrained(const ReducedBasis& basis, const Vector& x_ref,
                                                     const Vector& x, const FieldLayout& layout,
                                                     const std::vector<double>& bounds,
                                                     SolverOptions options);

/// Binary basis file: "CGROMBAS", uint32 version, uint64 N, uint64 p, N*p doubles
/// (column major), p doubles of singular values (zeros when unknown).
void save_basis(const std::string& path, const ReducedBasis& basis);
[[nodiscard]] ReducedBasis load_basis(const std::string& path);

}  // namespace cgrom
