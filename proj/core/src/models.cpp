#include "cgrom/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cgrom {

// ---------------------------------------------------------------------------
// Burgers

BurgersModel::BurgersModel(Index cells, double length, double final_time)
    : cells_(cells), length_(length), final_time_(final_time) {
  require(cells_ >= 2, "BurgersModel: need at least two cells");
  require(length_ > 0.0 && final_time_ > 0.0, "BurgersModel: length and final time must be positive");
}

Vector BurgersModel::velocity(const Vector& x, double, const ParamVector& mu) const {
  check_state(x, "state");
  check_params(mu);
  const double ub = inflow(mu);
  const double inv_dz = 1.0 / dz();
  Vector f(cells_);
  double flux_left = 0.5 * ub * ub;
  for (Index i = 0; i < cells_; ++i) {
    const double flux = 0.5 * x[i] * x[i];
    f[i] = -(flux - flux_left) * inv_dz;
    flux_left = flux;
  }
  return f;
}

SparseMatrix BurgersModel::velocity_jacobian(const Vector& x, double, const ParamVector& mu) const {
  check_state(x, "state");
  check_params(mu);
  const double inv_dz = 1.0 / dz();
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(2 * cells_));
  for (Index i = 0; i < cells_; ++i) {
    t.emplace_back(i, i, -x[i] * inv_dz);
    if (i > 0) t.emplace_back(i, i - 1, x[i - 1] * inv_dz);
  }
  SparseMatrix jac(cells_, cells_);
  jac.setFromTriplets(t.begin(), t.end());
  return jac;
}

Vector BurgersModel::initial_state(const ParamVector& mu) const {
  check_params(mu);
  Vector x(cells_);
  for (Index i = 0; i < cells_; ++i) {
    const double z = (static_cast<double>(i) + 0.5) * dz();
    x[i] = mu[1] * std::cos(2.0 * std::numbers::pi * mu[0] * z / 100.0) + (mu[1] + 1.0);
  }
  return x;
}

std::vector<ParamVector> BurgersModel::training_set() {
  std::vector<ParamVector> out;
  for (double m1 : {0.8, 1.2})
    for (double m2 : {0.2, 0.6}) out.push_back({m1, m2});
  return out;
}

// ---------------------------------------------------------------------------
// Euler

EulerModel::EulerModel(Index nodes, double length, double final_time)
    : nodes_(nodes), length_(length), final_time_(final_time) {
  require(nodes_ >= 2, "EulerModel: need at least two nodes per field");
  require(length_ > 0.0 && final_time_ > 0.0, "EulerModel: length and final time must be positive");
}

Eigen::Vector3d EulerModel::inflow(const ParamVector& mu) {
  return {kU0, kP0 * mu[1], 1.0 / (mu[0] * mu[1])};
}

Vector EulerModel::velocity(const Vector& x, double, const ParamVector& mu) const {
  check_state(x, "state");
  check_params(mu);
  const Eigen::Vector3d bc = inflow(mu);
  const double inv_dz = 1.0 / dz();
  const Index n = nodes_;
  Vector f(3 * n);
  for (Index i = 0; i < n; ++i) {
    const double u = x[i];
    const double p = x[n + i];
    const double v = x[2 * n + i];
    const double du = (u - (i > 0 ? x[i - 1] : bc[0])) * inv_dz;
    const double dp = (p - (i > 0 ? x[n + i - 1] : bc[1])) * inv_dz;
    const double dv = (v - (i > 0 ? x[2 * n + i - 1] : bc[2])) * inv_dz;
    f[i] = -u * du - v * dp;
    f[n + i] = -u * dp - kGamma * p * du;
    f[2 * n + i] = -u * dv + v * du;
  }
  return f;
}

SparseMatrix EulerModel::velocity_jacobian(const Vector& x, double, const ParamVector& mu) const {
  check_state(x, "state");
  check_params(mu);
  const Eigen::Vector3d bc = inflow(mu);
  const double h = 1.0 / dz();
  const Index n = nodes_;
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(14 * n));
  for (Index i = 0; i < n; ++i) {
    const Index iu = i;
    const Index ip = n + i;
    const Index iv = 2 * n + i;
    const double u = x[iu];
    const double p = x[ip];
    const double v = x[iv];
    const double du = (u - (i > 0 ? x[iu - 1] : bc[0])) * h;
    const double dp = (p - (i > 0 ? x[ip - 1] : bc[1])) * h;
    const double dv = (v - (i > 0 ? x[iv - 1] : bc[2])) * h;

    // u row: -u du - v dp
    t.emplace_back(iu, iu, -du - u * h);
    t.emplace_back(iu, ip, -v * h);
    t.emplace_back(iu, iv, -dp);
    // p row: -u dp - gamma p du
    t.emplace_back(ip, iu, -dp - kGamma * p * h);
    t.emplace_back(ip, ip, -u * h - kGamma * du);
    // v row: -u dv + v du
    t.emplace_back(iv, iu, -dv + v * h);
    t.emplace_back(iv, iv, -u * h + du);
    if (i > 0) {
      t.emplace_back(iu, iu - 1, u * h);
      t.emplace_back(iu, ip - 1, v * h);
      t.emplace_back(ip, ip - 1, u * h);
      t.emplace_back(ip, iu - 1, kGamma * p * h);
      t.emplace_back(iv, iv - 1, u * h);
      t.emplace_back(iv, iu - 1, -v * h);
    }
  }
  SparseMatrix jac(3 * n, 3 * n);
  jac.setFromTriplets(t.begin(), t.end());
  return jac;
}

Vector EulerModel::initial_state(const ParamVector& mu) const {
  check_params(mu);
  Vector x(3 * nodes_);
  x.segment(0, nodes_).setConstant(kU0);
  x.segment(nodes_, nodes_).setConstant(kP0);
  x.segment(2 * nodes_, nodes_).setConstant(1.0 / mu[0]);
  return x;
}

FieldLayout EulerModel::layout() const { return FieldLayout::uniform({"u", "p", "v"}, nodes_); }

std::vector<ParamVector> EulerModel::training_set() {
  std::vector<ParamVector> out;
  for (double m1 : {1.1, 1.6})
    for (double m2 : {1.1, 1.4}) out.push_back({m1, m2});
  return out;
}

// ---------------------------------------------------------------------------
// Diffusion

DiffusionModel::DiffusionModel(Index per_axis, double final_time) : n_(per_axis), final_time_(final_time) {
  require(n_ >= 3, "DiffusionModel: need at least three nodes per axis");
  require(final_time_ > 0.0, "DiffusionModel: final time must be positive");
}

std::pair<Index, Index> DiffusionModel::source_nodes(double t, const ParamVector& mu) const {
  check_params(mu);
  const double swing = mu[3] * std::sin(2.0 * std::numbers::pi * mu[2] * t);
  auto node = [&](double y, double z) {
    auto snap = [&](double c) {
      const double clamped = std::clamp(c, 0.0, 1.0);
      return static_cast<Index>(std::lround(clamped / h()));
    };
    return snap(z) * n_ + snap(y);
  };
  return {node(0.5 + swing, 0.2), node(0.5 - swing, 0.5)};
}

Vector DiffusionModel::source(double t, const ParamVector& mu) const {
  Vector s = Vector::Zero(dim());
  const auto [k1, k2] = source_nodes(t, mu);
  s[k1] += mu[0];
  s[k2] += mu[1];
  return s;
}

Vector DiffusionModel::velocity(const Vector& x, double t, const ParamVector& mu) const {
  check_state(x, "state");
  check_params(mu);
  const double inv_h2 = 1.0 / (h() * h());
  Vector f = source(t, mu);
  // Face fluxes; a missing neighbour is a ghost equal to the boundary node (zero flux).
  auto face = [&](Index a, Index b) {
    const double lam = 0.5 * (conductivity(x[a]) + conductivity(x[b]));
    const double q = lam * (x[b] - x[a]) * inv_h2;
    f[a] += q;
    f[b] -= q;
  };
  for (Index iz = 0; iz < n_; ++iz) {
    for (Index iy = 0; iy < n_; ++iy) {
      const Index k = iz * n_ + iy;
      if (iy + 1 < n_) face(k, k + 1);
      if (iz + 1 < n_) face(k, k + n_);
    }
  }
  return f / rho_c();
}

SparseMatrix DiffusionModel::velocity_jacobian(const Vector& x, double, const ParamVector& mu) const {
  check_state(x, "state");
  check_params(mu);
  const double scale = 1.0 / (h() * h() * rho_c());
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(8 * dim()));
  auto face = [&](Index a, Index b) {
    const double lam = 0.5 * (conductivity(x[a]) + conductivity(x[b]));
    const double half_gap = 0.5 * (x[b] - x[a]);
    // q = lam (x_b - x_a); dq/dx_a = half_gap - lam, dq/dx_b = half_gap + lam
    const double qa = (half_gap - lam) * scale;
    const double qb = (half_gap + lam) * scale;
    t.emplace_back(a, a, qa);
    t.emplace_back(a, b, qb);
    t.emplace_back(b, a, -qa);
    t.emplace_back(b, b, -qb);
  };
  for (Index iz = 0; iz < n_; ++iz) {
    for (Index iy = 0; iy < n_; ++iy) {
      const Index k = iz * n_ + iy;
      if (iy + 1 < n_) face(k, k + 1);
      if (iz + 1 < n_) face(k, k + n_);
    }
  }
  SparseMatrix jac(dim(), dim());
  jac.setFromTriplets(t.begin(), t.end());
  return jac;
}

Vector DiffusionModel::initial_state(const ParamVector& mu) const {
  check_params(mu);
  return Vector::Constant(dim(), kInitialTemperature);
}

double DiffusionModel::energy(const Vector& x) const {
  check_state(x, "state");
  return rho_c() / static_cast<double>(dim()) * x.sum();
}

std::vector<ParamVector> DiffusionModel::training_set() {
  std::vector<ParamVector> out;
  const double strengths[2][2] = {{-1.1e6, 0.9e6}, {-1e6, 1e6}};
  for (const auto& s : strengths)
    for (double m3 : {5e-5, 15e-5})
      for (double m4 : {0.1, 0.3}) out.push_back({s[0], s[1], m3, m4});
  return out;
}

Matrix DiffusionModel::rsum_matrix() const {
  const Index n = dim();
  const Index mid = (n + 1) / 2;
  require(mid >= 50 && mid + 50 <= n, "rsum_matrix: grid too small for a 100-entry overlap");
  Matrix c = Matrix::Zero(2, n);
  c.row(0).head(mid + 50).setOnes();
  c.row(1).tail(n - (mid - 50)).setOnes();
  return c;
}

}  // namespace cgrom
