#include <Eigen/SparseLU>

#include "cgrom/solvers.hpp"

namespace cgrom {

const char* to_string(NewtonStatus status) {
  switch (status) {
    case NewtonStatus::converged: return "converged";
    case NewtonStatus::max_iter: return "max_iter";
    case NewtonStatus::singular_jacobian: return "singular_jacobian";
  }
  return "unknown";
}

namespace {

template <class LinearSolve>
NewtonResult newton_loop(const ResidualFn& residual, LinearSolve&& solve, Vector x, const NewtonOptions& opt) {
  NewtonResult res;
  Vector r = residual(x);
  require(r.size() == x.size(), "newton_solve: residual must be square");
  res.initial_residual_norm = r.norm();
  res.residual_norm = res.initial_residual_norm;
  auto done = [&](double norm) {
    return norm < opt.abs_tol || (res.initial_residual_norm > 0.0 && norm / res.initial_residual_norm < opt.rel_tol);
  };
  if (res.residual_norm < opt.abs_tol) {
    res.status = NewtonStatus::converged;
    res.x = std::move(x);
    return res;
  }
  for (int it = 1; it <= opt.max_iter; ++it) {
    Vector dx;
    if (!solve(x, r, dx) || !dx.allFinite()) {
      res.status = NewtonStatus::singular_jacobian;
      break;
    }
    x += dx;
    r = residual(x);
    res.iterations = it;
    res.residual_norm = r.norm();
    if (done(res.residual_norm)) {
      res.status = NewtonStatus::converged;
      break;
    }
  }
  res.x = std::move(x);
  return res;
}

}  // namespace

NewtonResult newton_solve(const ResidualFn& residual, const DenseJacobianFn& jacobian, Vector x_init,
                          const NewtonOptions& options) {
  auto solve = [&](const Vector& x, const Vector& r, Vector& dx) {
    const Matrix jac = jacobian(x);
    Eigen::ColPivHouseholderQR<Matrix> qr(jac);
    if (qr.rank() < jac.cols()) return false;
    dx = qr.solve(-r);
    return true;
  };
  return newton_loop(residual, solve, std::move(x_init), options);
}

NewtonResult newton_solve(const ResidualFn& residual, const SparseJacobianFn& jacobian, Vector x_init,
                          const NewtonOptions& options) {
  Eigen::SparseLU<SparseMatrix> lu;
  auto solve = [&](const Vector& x, const Vector& r, Vector& dx) {
    SparseMatrix jac = jacobian(x);
    jac.makeCompressed();
    lu.compute(jac);
    if (lu.info() != Eigen::Success) return false;
    dx = lu.solve(-r);
    return lu.info() == Eigen::Success;
  };
  return newton_loop(residual, solve, std::move(x_init), options);
}

}  // namespace cgrom
