#pragma once

#include <functional>
#include <random>

#include "cgrom/types.hpp"

namespace cgrom::test {

/// Central-difference Jacobian with per-entry step h * max(1, |x_j|).
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x, double h = 1e-6) {
  const Vector f0 = f(x);
  Matrix jac(f0.size(), x.size());
  for (Index j = 0; j < x.size(); ++j) {
    const double step = h * std::max(1.0, std::abs(x[j]));
    Vector xp = x;
    Vector xm = x;
    xp[j] += step;
    xm[j] -= step;
    jac.col(j) = (f(xp) - f(xm)) / (2.0 * step);
  }
  return jac;
}

/// ||a - b||_F / max(||a||_F, floor).
inline double relative_difference(const Matrix& a, const Matrix& b, double floor = 1e-300) {
  return (a - b).norm() / std::max(a.norm(), floor);
}

inline Vector random_vector(Index n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

/// Orthonormal N x p matrix from a QR factorization of a Gaussian matrix.
inline Matrix random_orthonormal(Index n, Index p, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(n, p, rng));
  return qr.householderQ() * Matrix::Identity(n, p);
}

}  // namespace cgrom::test
