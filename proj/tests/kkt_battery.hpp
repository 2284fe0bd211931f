#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cgrom/solvers.hpp"
#include "support.hpp"

namespace cgrom::test {

// min (x - 1)^2 + (y - 2.5)^2 over a pentagon.
struct Polygon {
  Matrix a{{1.0, -2.0}, {-1.0, -2.0}, {-1.0, 2.0}, {1.0, 0.0}, {0.0, 1.0}};
  Vector b{{2.0, 6.0, 2.0, 0.0, 0.0}};
  Matrix h = 2.0 * Matrix::Identity(2, 2);
  Vector g{{-2.0, -5.0}};
  [[nodiscard]] double objective(const Vector& x) const { return 0.5 * x.dot(h * x) + g.dot(x); }
  [[nodiscard]] bool feasible(const Vector& x, double tol = 1e-12) const {
    return (a * x + b).minCoeff() >= -tol;
  }
};

/// Exhaustive active-set enumeration: solve the equality QP for every subset
/// of at most two rows and keep the best feasible candidate.
inline Vector polygon_oracle(const Polygon& q) {
  Vector best;
  double best_f = std::numeric_limits<double>::infinity();
  const Index m = q.a.rows();
  auto consider = [&](const std::vector<Index>& rows) {
    const Index k = static_cast<Index>(rows.size());
    Matrix kkt = Matrix::Zero(2 + k, 2 + k);
    Vector rhs(2 + k);
    kkt.topLeftCorner(2, 2) = q.h;
    rhs.head(2) = -q.g;
    for (Index r = 0; r < k; ++r) {
      kkt.block(0, 2 + r, 2, 1) = q.a.row(rows[static_cast<std::size_t>(r)]).transpose();
      kkt.block(2 + r, 0, 1, 2) = q.a.row(rows[static_cast<std::size_t>(r)]);
      rhs[2 + r] = -q.b[rows[static_cast<std::size_t>(r)]];
    }
    Eigen::FullPivLU<Matrix> lu(kkt);
    if (!lu.isInvertible()) return;
    const Vector x = lu.solve(rhs).head(2);
    if (q.feasible(x, 1e-12) && q.objective(x) < best_f) {
      best_f = q.objective(x);
      best = x;
    }
  };
  consider({});
  for (Index i = 0; i < m; ++i) {
    consider({i});
    for (Index j = i + 1; j < m; ++j) consider({i, j});
  }
  return best;
}

// TV ball: min 1/2 ||x - a||^2 s.t. b - sum |x_{i+1} - x_i| >= 0.
inline std::shared_ptr<FunctionNlp> tv_ball(const Vector& a, double b) {
  auto nlp = std::make_shared<FunctionNlp>(
      a.size(), [a](const Vector& x) { return 0.5 * (x - a).squaredNorm(); },
      [a](const Vector& x) { return Vector(x - a); });
  nlp->inequalities(
      1,
      [b](const Vector& x) {
        double tv = 0.0;
        for (Index i = 0; i + 1 < x.size(); ++i) tv += std::abs(x[i + 1] - x[i]);
        return Vector::Constant(1, b - tv).eval();
      },
      [](const Vector& x) {
        Matrix j = Matrix::Zero(1, x.size());
        for (Index i = 0; i + 1 < x.size(); ++i) {
          const double s = (x[i + 1] > x[i]) - (x[i + 1] < x[i]);
          j(0, i) += s;
          j(0, i + 1) -= s;
        }
        return j;
      });
  nlp->hessian([n = a.size()](const Vector&) { return Matrix(Matrix::Identity(n, n)); });
  nlp->convex(true);
  return nlp;
}

struct BatteryCase {
  std::string name;
  std::shared_ptr<FunctionNlp> problem;
  SolverOptions options;
  Vector point;
  double objective = 0.0;
  double point_tol = 1e-5;
  bool strict = true;  // require `converged` and gtol stationarity; nonsmooth cases accept `acceptable`
};

inline SolverOptions start_at(Vector x0, int max_iter = 200) {
  SolverOptions o;
  o.warm_start = std::move(x0);
  o.max_iter = max_iter;
  return o;
}

/// Empty when the result meets the case's expectations, else a description of the first miss.
inline std::string check_case(const BatteryCase& c, const NlpResult& res) {
  std::ostringstream os;
  if (c.strict ? res.status != NlpStatus::converged : !res.usable()) os << "status " << to_string(res.status) << "; ";
  if (res.point.size() != c.point.size()) return os.str() + "wrong dimension";
  const double dx = (res.point - c.point).cwiseAbs().maxCoeff();
  if (!(dx <= c.point_tol)) os << "point off by " << dx << "; ";
  if (!(std::abs(res.objective - c.objective) <= 1e-6 * std::max(1.0, std::abs(c.objective))))
    os << "objective " << res.objective << " vs " << c.objective << "; ";
  if (c.strict && !(res.kkt_stationarity <= c.options.gtol)) os << "stationarity " << res.kkt_stationarity << "; ";
  if (!(res.kkt_feasibility_eq <= 10.0 * c.options.constraint_tol)) os << "eq infeasibility " << res.kkt_feasibility_eq << "; ";
  if (!(res.kkt_feasibility_ineq <= 10.0 * c.options.constraint_tol))
    os << "ineq infeasibility " << res.kkt_feasibility_ineq << "; ";
  if (!(res.kkt_complementarity <= 1e-6)) os << "complementarity " << res.kkt_complementarity << "; ";
  if (res.multipliers_ineq.size() > 0 && res.multipliers_ineq.minCoeff() < -1e-10) os << "negative multiplier; ";
  return os.str();
}

/// Small NLPs with known solutions: textbook test problems, closed-form
/// projections and problems whose oracle is computed here.
inline std::vector<BatteryCase> kkt_battery() {
  std::vector<BatteryCase> out;

  {
    const Polygon q;
    auto nlp = std::make_shared<FunctionNlp>(
        2, [q](const Vector& x) { return q.objective(x); }, [q](const Vector& x) { return Vector(q.h * x + q.g); });
    nlp->inequalities(5, [q](const Vector& x) { return Vector(q.a * x + q.b); }, [q](const Vector&) { return q.a; });
    const Vector oracle = polygon_oracle(q);
    out.push_back({"polygon_qp", nlp, start_at(Vector{{2.0, 0.0}}), oracle, q.objective(oracle), 1e-4});
  }
  {
    auto nlp = std::make_shared<FunctionNlp>(
        2, [](const Vector& x) { return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2); },
        [](const Vector& x) {
          return Vector{{-400.0 * x[0] * (x[1] - x[0] * x[0]) - 2.0 * (1.0 - x[0]), 200.0 * (x[1] - x[0] * x[0])}};
        });
    out.push_back({"rosenbrock", nlp, start_at(Vector{{-1.2, 1.0}}, 500), Vector{{1.0, 1.0}}, 0.0, 1e-4});
  }
  {
    auto nlp = std::make_shared<FunctionNlp>(
        2, [](const Vector& x) { return std::pow(1.0 - x[0], 2); },
        [](const Vector& x) { return Vector{{-2.0 * (1.0 - x[0]), 0.0}}; });
    nlp->equalities(
        1, [](const Vector& x) { return Vector::Constant(1, 10.0 * (x[1] - x[0] * x[0])).eval(); },
        [](const Vector& x) { return Matrix{{-20.0 * x[0], 10.0}}; });
    out.push_back({"hs6", nlp, start_at(Vector{{-1.2, 1.0}}), Vector{{1.0, 1.0}}, 0.0});
  }
  {
    auto nlp = std::make_shared<FunctionNlp>(
        2, [](const Vector& x) { return x[0] + x[1]; }, [](const Vector&) { return Vector{{1.0, 1.0}}; });
    nlp->equalities(
        1, [](const Vector& x) { return Vector::Constant(1, x.squaredNorm() - 2.0).eval(); },
        [](const Vector& x) { return Matrix(2.0 * x.transpose()); });
    out.push_back({"circle", nlp, start_at(Vector{{-1.0, 0.5}}), Vector{{-1.0, -1.0}}, -2.0});
  }
  {
    auto nlp = std::make_shared<FunctionNlp>(
        4, [](const Vector& x) { return x[0] * x[3] * (x[0] + x[1] + x[2]) + x[2]; },
        [](const Vector& x) {
          return Vector{{x[3] * (2.0 * x[0] + x[1] + x[2]), x[0] * x[3], x[0] * x[3] + 1.0,
                         x[0] * (x[0] + x[1] + x[2])}};
        });
    nlp->equalities(
        1, [](const Vector& x) { return Vector::Constant(1, x.squaredNorm() - 40.0).eval(); },
        [](const Vector& x) { return Matrix(2.0 * x.transpose()); });
    nlp->inequalities(
        9,
        [](const Vector& x) {
          Vector g(9);
          g[0] = x.prod() - 25.0;
          g.segment(1, 4) = x.array() - 1.0;
          g.segment(5, 4) = 5.0 - x.array();
          return g;
        },
        [](const Vector& x) {
          Matrix j = Matrix::Zero(9, 4);
          j(0, 0) = x[1] * x[2] * x[3];
          j(0, 1) = x[0] * x[2] * x[3];
          j(0, 2) = x[0] * x[1] * x[3];
          j(0, 3) = x[0] * x[1] * x[2];
          j.block(1, 0, 4, 4) = Matrix::Identity(4, 4);
          j.block(5, 0, 4, 4) = -Matrix::Identity(4, 4);
          return j;
        });
    out.push_back({"hs71", nlp, start_at(Vector{{1.0, 5.0, 5.0, 1.0}}),
                   Vector{{1.0, 4.7429996, 3.8211499, 1.3794082}}, 17.0140173});
  }
  {
    auto nlp = std::make_shared<FunctionNlp>(
        2, [](const Vector& x) { return x.squaredNorm(); }, [](const Vector& x) { return Vector(2.0 * x); });
    nlp->inequalities(
        1, [](const Vector& x) { return Vector::Constant(1, x[0] + x[1] - 1.0).eval(); },
        [](const Vector&) { return Matrix{{1.0, 1.0}}; });
    out.push_back({"half_plane", nlp, start_at(Vector{{3.0, -1.0}}), Vector{{0.5, 0.5}}, 0.5});
  }
  {
    auto nlp = std::make_shared<FunctionNlp>(
        1, [](const Vector& x) { return std::pow(x[0] - 2.0, 2); },
        [](const Vector& x) { return Vector::Constant(1, 2.0 * (x[0] - 2.0)).eval(); });
    nlp->inequalities(
        1, [](const Vector& x) { return Vector::Constant(1, 1.0 - x[0]).eval(); },
        [](const Vector&) { return Matrix::Constant(1, 1, -1.0).eval(); });
    out.push_back({"upper_bound", nlp, start_at(Vector::Zero(1)), Vector::Ones(1), 1.0});
  }
  {
    auto nlp = std::make_shared<FunctionNlp>(
        2, [](const Vector& x) { return 0.01 * x[0] * x[0] + x[1] * x[1] - 100.0; },
        [](const Vector& x) { return Vector{{0.02 * x[0], 2.0 * x[1]}}; });
    nlp->inequalities(
        5,
        [](const Vector& x) { return Vector{{10.0 * x[0] - x[1] - 10.0, x[0] - 2.0, 50.0 - x[0], x[1] + 50.0, 50.0 - x[1]}}; },
        [](const Vector&) { return Matrix{{10.0, -1.0}, {1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0}}; });
    out.push_back({"hs21", nlp, start_at(Vector{{-1.0, -1.0}}), Vector{{2.0, 0.0}}, -99.96});
  }
  {
    auto nlp = std::make_shared<FunctionNlp>(
        3,
        [](const Vector& x) {
          return 9.0 - 8.0 * x[0] - 6.0 * x[1] - 4.0 * x[2] + 2.0 * x[0] * x[0] + 2.0 * x[1] * x[1] + x[2] * x[2] +
                 2.0 * x[0] * x[1] + 2.0 * x[0] * x[2];
        },
        [](const Vector& x) {
          return Vector{{-8.0 + 4.0 * x[0] + 2.0 * x[1] + 2.0 * x[2], -6.0 + 4.0 * x[1] + 2.0 * x[0],
                         -4.0 + 2.0 * x[2] + 2.0 * x[0]}};
        });
    nlp->inequalities(
        4, [](const Vector& x) { return Vector{{3.0 - x[0] - x[1] - 2.0 * x[2], x[0], x[1], x[2]}}; },
        [](const Vector&) { return Matrix{{-1.0, -1.0, -2.0}, {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}; });
    out.push_back({"hs35", nlp, start_at(Vector{{0.5, 0.5, 0.5}}), Vector{{4.0 / 3.0, 7.0 / 9.0, 4.0 / 9.0}}, 1.0 / 9.0});
  }
  {
    // Oracle: the KKT linear system of the equality-constrained least-squares problem.
    std::mt19937_64 rng(5);
    const Matrix a = random_matrix(6, 4, rng);
    const Vector y = random_vector(6, rng);
    const Matrix c = random_matrix(2, 4, rng);
    const Vector d = random_vector(2, rng);
    Matrix kkt = Matrix::Zero(6, 6);
    kkt.topLeftCorner(4, 4) = a.transpose() * a;
    kkt.topRightCorner(4, 2) = c.transpose();
    kkt.bottomLeftCorner(2, 4) = c;
    Vector rhs(6);
    rhs << a.transpose() * y, d;
    const Vector oracle = kkt.fullPivLu().solve(rhs).head(4);
    auto nlp = std::make_shared<FunctionNlp>(
        4, [a, y](const Vector& x) { return 0.5 * (a * x - y).squaredNorm(); },
        [a, y](const Vector& x) { return Vector(a.transpose() * (a * x - y)); });
    nlp->equalities(2, [c, d](const Vector& x) { return Vector(c * x - d); }, [c](const Vector&) { return c; });
    nlp->hessian([a](const Vector&) { return Matrix(a.transpose() * a); });
    out.push_back({"eq_least_squares", nlp, start_at(Vector::Zero(4)), oracle, 0.5 * (a * oracle - y).squaredNorm(), 1e-8});
  }
  {
    // The jump 3 shrinks symmetrically to 1.
    auto nlp = tv_ball(Vector{{0.0, 3.0}}, 1.0);
    out.push_back({"tv_ball_2", nlp, start_at(Vector{{0.0, 3.0}}), Vector{{1.0, 2.0}}, 1.0, 1e-7, false});
  }
  {
    // Stationarity x - a = mu (1, -2, 1) with mu = 2/3.
    const Vector a{{0.0, 3.0, 0.0}};
    const Vector want{{2.0 / 3.0, 5.0 / 3.0, 2.0 / 3.0}};
    auto nlp = tv_ball(a, 2.0);
    out.push_back({"tv_ball_3", nlp, start_at(a), want, 0.5 * (want - a).squaredNorm(), 1e-7, false});
  }
  return out;
}

}  // namespace cgrom::test
