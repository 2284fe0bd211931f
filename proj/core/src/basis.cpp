#include "cgrom/basis.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <Eigen/SVD>

#include "cgrom/constraints.hpp"

namespace cgrom {

void SnapshotMatrix::append_run(const TrajectorySolution& run, const Vector& x_ref) {
  require(run.states.size() >= 2, "SnapshotMatrix: run has no accepted steps");
  for (std::size_t n = 1; n < run.states.size(); ++n) {
    require(run.states[n].size() == x_ref.size(), "SnapshotMatrix: reference length mismatch");
    append_column(run.states[n] - x_ref);
  }
}

void SnapshotMatrix::append_column(const Vector& column) {
  require(column.allFinite(), "SnapshotMatrix: snapshot has non-finite entries");
  if (data_.size() == 0) {
    data_ = column;
    return;
  }
  require(column.size() == data_.rows(), "SnapshotMatrix: snapshot length changed");
  data_.conservativeResize(Eigen::NoChange, data_.cols() + 1);
  data_.col(data_.cols() - 1) = column;
}

// ---------------------------------------------------------------------------

ReducedBasis::ReducedBasis(Matrix phi, Vector singular_values) : phi_(std::move(phi)), sigma_(std::move(singular_values)) {
  require(phi_.cols() >= 1 && phi_.rows() >= phi_.cols(), "ReducedBasis: need N >= p >= 1");
  require(orthonormality_error() <= 1e-10, "ReducedBasis: columns are not orthonormal");
}

ReducedBasis ReducedBasis::identity(Index n) { return ReducedBasis(Matrix::Identity(n, n)); }

ReducedBasis ReducedBasis::truncate(Index q) const {
  require(q >= 1 && q <= p(), "ReducedBasis::truncate: size out of range");
  return ReducedBasis(phi_.leftCols(q), sigma_.size() >= q ? Vector(sigma_.head(q)) : Vector());
}

double ReducedBasis::orthonormality_error() const {
  return (phi_.transpose() * phi_ - Matrix::Identity(p(), p())).cwiseAbs().maxCoeff();
}

ReferenceState::ReferenceState(Fn fn, std::string name) : fn_(std::move(fn)), name_(std::move(name)) {
  require(static_cast<bool>(fn_), "ReferenceState: function is required");
}

ReferenceState ReferenceState::initial_condition(std::shared_ptr<const FullOrderModel> model) {
  require(model != nullptr, "ReferenceState: model is required");
  return ReferenceState([model](const ParamVector& mu) { return model->initial_state(mu); }, "initial");
}

ReferenceState ReferenceState::zero(Index dim) {
  return ReferenceState([dim](const ParamVector&) { return Vector::Zero(dim); }, "zero");
}

// ---------------------------------------------------------------------------

Vector snapshot_singular_values(const SnapshotMatrix& snapshots) {
  require(snapshots.cols() > 0, "snapshot_singular_values: no snapshots");
  Eigen::BDCSVD<Matrix> svd(snapshots.data());
  return svd.singularValues();
}

ReducedBasis pod(const SnapshotMatrix& snapshots, Index p) {
  require(snapshots.cols() > 0, "pod: no snapshots");
  require(p >= 1, "pod: basis size must be positive");
  Eigen::BDCSVD<Matrix> svd(snapshots.data(), Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  Index rank = 0;
  while (rank < s.size() && s[rank] > kPodRankTolerance * s[0]) ++rank;
  if (p > rank) {
    std::ostringstream os;
    os << "pod: requested " << p << " modes but the snapshot matrix has numerical rank " << rank
       << "; the largest admissible basis size is " << rank;
    throw ContractViolation(os.str());
  }
  Matrix phi = svd.matrixU().leftCols(p);
  for (Index j = 0; j < p; ++j) {
    Index imax = 0;
    phi.col(j).cwiseAbs().maxCoeff(&imax);
    if (phi(imax, j) < 0.0) phi.col(j) *= -1.0;
  }
  return ReducedBasis(std::move(phi), s.head(p));
}

Vector encode(const ReducedBasis& basis, const Vector& x_ref, const Vector& x) {
  require(x.size() == basis.n() && x_ref.size() == basis.n(), "encode: dimension mismatch");
  return basis.phi().transpose() * (x - x_ref);
}

Vector decode(const ReducedBasis& basis, const Vector& x_ref, const Vector& xhat) {
  require(xhat.size() == basis.p() && x_ref.size() == basis.n(), "decode: dimension mismatch");
  return x_ref + basis.phi() * xhat;
}

Vector encode(const ReducedBasis& basis, const ReferenceState& ref, const Vector& x, const ParamVector& mu) {
  return encode(basis, ref(mu), x);
}

Vector decode(const ReducedBasis& basis, const ReferenceState& ref, const Vector& xhat, const ParamVector& mu) {
  return decode(basis, ref(mu), xhat);
}

// ---------------------------------------------------------------------------

namespace {

class SnapshotProjection final : public NlpProblem {
 public:
  SnapshotProjection(const ReducedBasis& basis, const Vector& x_ref, const Vector& x, const FieldLayout& layout,
                     const std::vector<double>& bounds)
      : phi_(basis.phi()), x_ref_(x_ref), target_(x - x_ref), tvb_(layout, bounds) {}

  [[nodiscard]] Index dim() const override { return phi_.cols(); }
  [[nodiscard]] Index n_ineq() const override { return tvb_.rows(); }
  [[nodiscard]] bool convex() const override { return true; }

  [[nodiscard]] NlpValues values(const Vector& xhat) const override {
    NlpValues v;
    const Vector full = phi_ * xhat;
    v.objective = 0.5 * (full - target_).squaredNorm();
    v.ineq = tvb_.evaluate(x_ref_ + full, 0.0, {}).value;
    v.eq.resize(0);
    return v;
  }

  [[nodiscard]] NlpDerivatives derivatives(const Vector& xhat) const override {
    NlpDerivatives d;
    const Vector full = phi_ * xhat;
    d.gradient = phi_.transpose() * (full - target_);
    d.hessian = phi_.transpose() * phi_;
    d.eq_jacobian.resize(0, dim());
    d.ineq_jacobian = tvb_.evaluate(x_ref_ + full, 0.0, {}).d_state * phi_;
    return d;
  }

 private:
  const Matrix& phi_;
  Vector x_ref_;
  Vector target_;
  TvbConstraint tvb_;
};

}  // namespace

NlpResult project_snapshot_constrained(const ReducedBasis& basis, const Vector& x_ref, const Vector& x,
                                       const FieldLayout& layout, const std::vector<double>& bounds,
                                       SolverOptions options) {
  require(layout.dim() == basis.n(), "project_snapshot_constrained: layout does not cover the state");
  const SnapshotProjection problem(basis, x_ref, x, layout, bounds);
  if (!options.warm_start) options.warm_start = encode(basis, x_ref, x);
  return solve_nlp(problem, options);
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'C', 'G', 'R', 'O', 'M', 'B', 'A', 'S'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_basis(const std::string& path, const ReducedBasis& basis) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_basis: cannot open " + path);
  const auto n = static_cast<std::uint64_t>(basis.n());
  const auto p = static_cast<std::uint64_t>(basis.p());
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(&p), sizeof p);
  out.write(reinterpret_cast<const char*>(basis.phi().data()),
            static_cast<std::streamsize>(sizeof(double) * n * p));
  Vector sigma = Vector::Zero(basis.p());
  if (basis.singular_values().size() == basis.p()) sigma = basis.singular_values();
  out.write(reinterpret_cast<const char*>(sigma.data()), static_cast<std::streamsize>(sizeof(double) * p));
  if (!out) throw std::runtime_error("save_basis: write failed for " + path);
}

ReducedBasis load_basis(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_basis: cannot open " + path);
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t n = 0;
  std::uint64_t p = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  in.read(reinterpret_cast<char*>(&p), sizeof p);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw std::runtime_error("load_basis: bad header in " + path);
  if (version != kVersion) throw std::runtime_error("load_basis: unsupported version in " + path);
  if (n == 0 || p == 0 || p > n || n > (1u << 28)) throw std::runtime_error("load_basis: bad dimensions in " + path);
  Matrix phi(static_cast<Index>(n), static_cast<Index>(p));
  Vector sigma(static_cast<Index>(p));
  in.read(reinterpret_cast<char*>(phi.data()), static_cast<std::streamsize>(sizeof(double) * n * p));
  in.read(reinterpret_cast<char*>(sigma.data()), static_cast<std::streamsize>(sizeof(double) * p));
  if (!in) throw std::runtime_error("load_basis: truncated payload in " + path);
  if (sigma.isZero(0.0)) sigma.resize(0);
  return ReducedBasis(std::move(phi), std::move(sigma));
}

}  // namespace cgrom
