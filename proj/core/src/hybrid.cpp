// Powell hybrid method, following the structure of MINPACK's hybrd with
// mode = 1 (internal variable scaling).  The rank-one QR update is done by
// refactoring R + u v' instead of Givens sweeps; p is small in our use.

#include <algorithm>
#include <cmath>
#include <limits>

#include "cgrom/solvers.hpp"

namespace cgrom {

const char* to_string(HybridStatus status) {
  switch (status) {
    case HybridStatus::converged: return "converged";
    case HybridStatus::maxfev: return "maxfev";
    case HybridStatus::xtol_too_small: return "xtol_too_small";
    case HybridStatus::not_making_progress: return "not_making_progress";
  }
  return "unknown";
}

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Minimizes ||R x - qtb|| over the dogleg path inside ||D x|| <= delta.
Vector dogleg(const Matrix& r, const Vector& diag, const Vector& qtb, double delta) {
  const Index n = r.cols();
  Vector x(n);
  for (Index j = n - 1; j >= 0; --j) {
    double sum = qtb[j];
    for (Index i = j + 1; i < n; ++i) sum -= r(j, i) * x[i];
    double temp = r(j, j);
    if (temp == 0.0) {
      for (Index i = 0; i <= j; ++i) temp = std::max(temp, std::abs(r(i, j)));
      temp = temp == 0.0 ? kEps : kEps * temp;
    }
    x[j] = sum / temp;
  }
  const double qnorm = diag.cwiseProduct(x).norm();
  if (qnorm <= delta) return x;

  Vector grad = (r.transpose().triangularView<Eigen::Lower>() * qtb).cwiseQuotient(diag);
  const double gnorm = grad.norm();
  double sgnorm = 0.0;
  double alpha = delta / qnorm;
  if (gnorm != 0.0) {
    grad = (grad / gnorm).cwiseQuotient(diag);
    const double temp = (r.triangularView<Eigen::Upper>() * grad).norm();
    sgnorm = (gnorm / temp) / temp;
    alpha = 0.0;
    if (sgnorm < delta) {
      const double bnorm = qtb.norm();
      double t = (bnorm / gnorm) * (bnorm / qnorm) * (sgnorm / delta);
      const double dq = delta / qnorm;
      const double sd = sgnorm / delta;
      t = t - dq * sd * sd + std::sqrt((t - dq) * (t - dq) + (1.0 - dq * dq) * (1.0 - sd * sd));
      alpha = dq * (1.0 - sd * sd) / t;
    }
  }
  const double temp = (1.0 - alpha) * std::min(sgnorm, delta);
  return temp * grad + alpha * x;
}

struct QrPair {
  Matrix q;
  Matrix r;
};

QrPair qr_factor(const Matrix& a) {
  Eigen::HouseholderQR<Matrix> qr(a);
  QrPair out;
  out.q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
  out.r = qr.matrixQR().triangularView<Eigen::Upper>();
  return out;
}

}  // namespace

HybridResult hybrid_root(const ResidualFn& residual, Vector x, const HybridOptions& opt) {
  require(opt.maxfev > 0 && opt.xtol > 0.0 && opt.factor > 0.0, "hybrid_root: invalid options");
  const Index n = x.size();
  require(n > 0, "hybrid_root: empty unknown vector");

  HybridResult res;
  Vector fvec = residual(x);
  require(fvec.size() == n, "hybrid_root: residual must be square");
  res.nfev = 1;
  double fnorm = fvec.norm();
  auto finish = [&](HybridStatus status) {
    res.status = status;
    res.x = x;
    res.fvec = fvec;
    return res;
  };
  if (fnorm == 0.0) return finish(HybridStatus::converged);

  Vector diag = Vector::Ones(n);
  double delta = 0.0;
  double xnorm = 0.0;
  int iter = 1;
  int ncsuc = 0;
  int ncfail = 0;
  int nslow1 = 0;
  int nslow2 = 0;
  const double fd_eps = std::sqrt(kEps);

  while (true) {
    // Forward-difference Jacobian.
    Matrix jac(n, n);
    for (Index j = 0; j < n; ++j) {
      const double xj = x[j];
      double h = fd_eps * std::abs(xj);
      if (h == 0.0) h = fd_eps;
      x[j] = xj + h;
      const Vector fp = residual(x);
      x[j] = xj;
      jac.col(j) = (fp - fvec) / h;
    }
    res.nfev += static_cast<int>(n);
    res.jacobian_evals += 1;
    bool jeval = true;

    const Vector acnorm = jac.colwise().norm().transpose();
    QrPair qr = qr_factor(jac);
    if (iter == 1) {
      for (Index j = 0; j < n; ++j) diag[j] = acnorm[j] == 0.0 ? 1.0 : acnorm[j];
      xnorm = diag.cwiseProduct(x).norm();
      delta = opt.factor * xnorm;
      if (delta == 0.0) delta = opt.factor;
    }
    Vector qtf = qr.q.transpose() * fvec;
    diag = diag.cwiseMax(acnorm);

    while (true) {
      Vector step = -dogleg(qr.r, diag, qtf, delta);
      const Vector trial = x + step;
      const double pnorm = diag.cwiseProduct(step).norm();
      if (iter == 1) delta = std::min(delta, pnorm);

      const Vector ftrial = residual(trial);
      res.nfev += 1;
      const double fnorm1 = ftrial.norm();
      const double actred = fnorm1 < fnorm ? 1.0 - (fnorm1 / fnorm) * (fnorm1 / fnorm) : -1.0;

      const Vector lin = qr.r.triangularView<Eigen::Upper>() * step + qtf;
      const double lnorm = lin.norm();
      const double prered = lnorm < fnorm ? 1.0 - (lnorm / fnorm) * (lnorm / fnorm) : 0.0;
      const double ratio = prered > 0.0 ? actred / prered : 0.0;

      if (ratio < 0.1) {
        ncsuc = 0;
        ++ncfail;
        delta *= 0.5;
      } else {
        ncfail = 0;
        ++ncsuc;
        if (ratio >= 0.5 || ncsuc > 1) delta = std::max(delta, pnorm / 0.5);
        if (std::abs(ratio - 1.0) <= 0.1) delta = pnorm / 0.5;
      }

      const Vector qtf_new = qr.q.transpose() * ftrial;
      if (ratio >= 1e-4) {
        x = trial;
        fvec = ftrial;
        xnorm = diag.cwiseProduct(x).norm();
        fnorm = fnorm1;
        ++iter;
      }

      ++nslow1;
      if (actred >= 0.001) nslow1 = 0;
      if (jeval) ++nslow2;
      if (actred >= 0.1) nslow2 = 0;

      if (delta <= opt.xtol * xnorm || fnorm == 0.0) return finish(HybridStatus::converged);
      if (res.nfev >= opt.maxfev) return finish(HybridStatus::maxfev);
      if (0.1 * std::max(0.1 * delta, pnorm) <= kEps * xnorm) return finish(HybridStatus::xtol_too_small);
      if (nslow2 == 5 || nslow1 == 10) return finish(HybridStatus::not_making_progress);
      if (ncfail == 2) break;

      // Broyden update in the rotated frame: Q'J <- R + u v'.
      const Vector u = (qtf_new - lin) / pnorm;
      const Vector v = diag.cwiseProduct(diag.cwiseProduct(step) / pnorm);
      if (ratio >= 1e-4) qtf = qtf_new;
      const QrPair upd = qr_factor(qr.r + u * v.transpose());
      qr.q = qr.q * upd.q;
      qr.r = upd.r;
      qtf = upd.q.transpose() * qtf;
      jeval = false;
    }
  }
}

}  // namespace cgrom
