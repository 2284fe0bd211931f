// Goldfarb-Idnani dual active-set method for dense strictly convex QPs.
// J holds L^{-T} rotated so that its trailing columns span the null space
// of the active constraints; R is the triangular factor of the active set.

#include <cmath>
#include <limits>
#include <vector>

#include "cgrom/solvers.hpp"

namespace cgrom {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

class ActiveSet {
 public:
  ActiveSet(Matrix j, Index n) : j_(std::move(j)), r_(Matrix::Zero(n, n)) {}

  Matrix& j() { return j_; }
  Matrix& r() { return r_; }
  Index size() const { return iq_; }

  // z = J2 d2 (primal step direction), rr = R^{-1} d1 (dual step direction).
  void directions(const Vector& d, Vector& z, Vector& rr) const {
    const Index n = j_.rows();
    z = j_.rightCols(n - iq_) * d.tail(n - iq_);
    rr = r_.topLeftCorner(iq_, iq_).triangularView<Eigen::Upper>().solve(d.head(iq_));
  }

  bool add(Vector& d) {
    const Index n = j_.rows();
    for (Index k = n - 1; k >= iq_ + 1; --k) {
      double cc = d[k - 1];
      double ss = d[k];
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      d[k] = 0.0;
      ss /= h;
      cc /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d[k - 1] = -h;
      } else {
        d[k - 1] = h;
      }
      const double xny = ss / (1.0 + cc);
      for (Index row = 0; row < n; ++row) {
        const double t1 = j_(row, k - 1);
        const double t2 = j_(row, k);
        j_(row, k - 1) = t1 * cc + t2 * ss;
        j_(row, k) = xny * (t1 + j_(row, k - 1)) - t2;
      }
    }
    ++iq_;
    r_.col(iq_ - 1).head(iq_) = d.head(iq_);
    if (std::abs(d[iq_ - 1]) <= kEps * r_norm_) return false;
    r_norm_ = std::max(r_norm_, std::abs(d[iq_ - 1]));
    return true;
  }

  // Drops the active entry at position qq (>= first), keeping u/a aligned.
  void remove(Index qq, std::vector<Index>& a, Vector& u) {
    const Index n = j_.rows();
    for (Index i = qq; i < iq_ - 1; ++i) {
      a[i] = a[i + 1];
      u[i] = u[i + 1];
      r_.col(i) = r_.col(i + 1);
    }
    a[iq_ - 1] = a[iq_];
    u[iq_ - 1] = u[iq_];
    a[iq_] = 0;
    u[iq_] = 0.0;
    for (Index k = 0; k < iq_; ++k) r_(k, iq_ - 1) = 0.0;
    --iq_;
    if (iq_ == 0) return;
    for (Index k = qq; k < iq_; ++k) {
      double cc = r_(k, k);
      double ss = r_(k + 1, k);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      cc /= h;
      ss /= h;
      r_(k + 1, k) = 0.0;
      if (cc < 0.0) {
        r_(k, k) = -h;
        cc = -cc;
        ss = -ss;
      } else {
        r_(k, k) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (Index col = k + 1; col < iq_; ++col) {
        const double t1 = r_(k, col);
        const double t2 = r_(k + 1, col);
        r_(k, col) = t1 * cc + t2 * ss;
        r_(k + 1, col) = xny * (t1 + r_(k, col)) - t2;
      }
      for (Index row = 0; row < n; ++row) {
        const double t1 = j_(row, k);
        const double t2 = j_(row, k + 1);
        j_(row, k) = t1 * cc + t2 * ss;
        j_(row, k + 1) = xny * (j_(row, k) + t1) - t2;
      }
    }
  }

 private:
  Matrix j_;
  Matrix r_;
  Index iq_ = 0;
  double r_norm_ = 1.0;
};

}  // namespace

QpResult solve_qp(const Matrix& hessian, const Vector& gradient, const Matrix& a_eq, const Vector& b_eq,
                  const Matrix& a_ineq, const Vector& b_ineq) {
  const Index n = hessian.rows();
  const Index p = a_eq.rows();
  const Index m = a_ineq.rows();
  require(hessian.cols() == n && gradient.size() == n, "solve_qp: Hessian/gradient shape mismatch");
  require(a_eq.cols() == n || p == 0, "solve_qp: equality matrix has wrong column count");
  require(a_ineq.cols() == n || m == 0, "solve_qp: inequality matrix has wrong column count");
  require(b_eq.size() == p && b_ineq.size() == m, "solve_qp: constraint vector length mismatch");

  QpResult out;
  out.multipliers_eq = Vector::Zero(p);
  out.multipliers_ineq = Vector::Zero(m);

  Eigen::LLT<Matrix> chol(hessian);
  if (chol.info() != Eigen::Success) {
    out.status = QpStatus::degenerate;
    out.x = Vector::Zero(n);
    return out;
  }
  Matrix jinit = Matrix::Identity(n, n);
  chol.matrixU().solveInPlace(jinit);
  const double c1 = hessian.trace();
  const double c2 = jinit.trace();
  ActiveSet act(std::move(jinit), n);

  Vector x = chol.solve(-gradient);
  const Index cap = n + p + m + 1;
  std::vector<Index> a(static_cast<std::size_t>(cap), 0);
  std::vector<Index> a_old(static_cast<std::size_t>(cap), 0);
  Vector u = Vector::Zero(cap);
  Vector u_old = Vector::Zero(cap);
  Vector d(n);
  Vector z(n);
  Vector rr;

  auto finish = [&](QpStatus status) {
    out.status = status;
    out.x = x;
    out.objective = 0.5 * x.dot(hessian * x) + gradient.dot(x);
    for (Index i = 0; i < act.size(); ++i) {
      const Index id = a[static_cast<std::size_t>(i)];
      if (id < 0) {
        out.multipliers_eq[-id - 1] = u[i];
      } else {
        out.multipliers_ineq[id] = u[i];
      }
    }
    return out;
  };

  for (Index i = 0; i < p; ++i) {
    const Vector np = a_eq.row(i).transpose();
    d = act.j().transpose() * np;
    act.directions(d, z, rr);
    double t2 = 0.0;
    const double znp = z.dot(np);
    if (z.squaredNorm() > kEps) t2 = (-np.dot(x) - b_eq[i]) / znp;
    x += t2 * z;
    const Index iq = act.size();
    u[iq] = t2;
    u.head(iq) -= t2 * rr;
    a[static_cast<std::size_t>(iq)] = -i - 1;
    if (!act.add(d)) return finish(QpStatus::degenerate);
  }

  std::vector<Index> iai(static_cast<std::size_t>(m));
  std::vector<char> iaexcl(static_cast<std::size_t>(m), 1);
  for (Index i = 0; i < m; ++i) iai[static_cast<std::size_t>(i)] = i;
  Vector s(m);
  const int max_outer = static_cast<int>(50 * (n + m + 10));

  for (int outer = 0; outer < max_outer; ++outer) {
    // Step 1: mark active inequalities, measure infeasibility.
    for (Index i = p; i < act.size(); ++i) iai[static_cast<std::size_t>(a[static_cast<std::size_t>(i)])] = -1;
    double psi = 0.0;
    for (Index i = 0; i < m; ++i) {
      iaexcl[static_cast<std::size_t>(i)] = 1;
      s[i] = a_ineq.row(i).dot(x) + b_ineq[i];
      psi += std::min(0.0, s[i]);
    }
    if (std::abs(psi) <= static_cast<double>(m) * kEps * c1 * c2 * 100.0) return finish(QpStatus::optimal);
    for (Index i = 0; i < act.size(); ++i) {
      u_old[i] = u[i];
      a_old[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i)];
    }
    const Vector x_old = x;

    bool restart = false;
    while (!restart) {
      // Step 2: most violated inequality, lowest index on ties.
      double ss = 0.0;
      Index ip = -1;
      for (Index i = 0; i < m; ++i) {
        if (s[i] < ss && iai[static_cast<std::size_t>(i)] != -1 && iaexcl[static_cast<std::size_t>(i)]) {
          ss = s[i];
          ip = i;
        }
      }
      if (ip < 0) return finish(QpStatus::optimal);
      const Vector np = a_ineq.row(ip).transpose();
      u[act.size()] = 0.0;
      a[static_cast<std::size_t>(act.size())] = ip;

      while (true) {
        // Step 2a: primal and dual directions.
        d = act.j().transpose() * np;
        act.directions(d, z, rr);
        const Index iq = act.size();
        Index l = -1;
        double t1 = kInf;
        for (Index k = p; k < iq; ++k) {
          if (rr[k] > 0.0 && u[k] / rr[k] < t1) {
            t1 = u[k] / rr[k];
            l = a[static_cast<std::size_t>(k)];
          }
        }
        double t2 = kInf;
        if (z.squaredNorm() > kEps) t2 = -s[ip] / z.dot(np);
        const double t = std::min(t1, t2);
        if (t >= kInf) return finish(QpStatus::infeasible);

        auto drop = [&](Index id) {
          for (Index i = p; i < act.size(); ++i) {
            if (a[static_cast<std::size_t>(i)] == id) {
              act.remove(i, a, u);
              return;
            }
          }
        };

        if (t2 >= kInf) {
          // Dual step only.
          u.head(iq) -= t * rr;
          u[iq] += t;
          iai[static_cast<std::size_t>(l)] = l;
          drop(l);
          continue;
        }

        x += t * z;
        u.head(iq) -= t * rr;
        u[iq] += t;

        if (t == t2) {
          if (!act.add(d)) {
            // Linearly dependent with the active set: roll back, exclude ip.
            iaexcl[static_cast<std::size_t>(ip)] = 0;
            drop(ip);
            for (Index i = 0; i < m; ++i) iai[static_cast<std::size_t>(i)] = i;
            for (Index i = p; i < act.size(); ++i) {
              a[static_cast<std::size_t>(i)] = a_old[static_cast<std::size_t>(i)];
              u[i] = u_old[i];
              iai[static_cast<std::size_t>(a[static_cast<std::size_t>(i)])] = -1;
            }
            x = x_old;
            for (Index i = 0; i < m; ++i) s[i] = a_ineq.row(i).dot(x) + b_ineq[i];
            break;  // back to step 2 with the reduced candidate set
          }
          iai[static_cast<std::size_t>(ip)] = -1;
          restart = true;
          break;
        }

        // Partial step: drop the blocking constraint and retry.
        iai[static_cast<std::size_t>(l)] = l;
        drop(l);
        s[ip] = a_ineq.row(ip).dot(x) + b_ineq[ip];
      }
    }
  }
  return finish(QpStatus::degenerate);
}

}  // namespace cgrom
