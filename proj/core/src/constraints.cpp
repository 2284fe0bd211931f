#include "cgrom/constraints.hpp"

#include <cmath>
#include <sstream>

namespace cgrom {

namespace {

double sgn(double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); }

ConstraintBlock empty_block(Index p) { return {Vector(0), Matrix(0, p)}; }

ConstraintBlock stack(const ConstraintBlock& a, const ConstraintBlock& b) {
  ConstraintBlock out;
  out.value.resize(a.value.size() + b.value.size());
  out.value << a.value, b.value;
  out.jacobian.resize(a.jacobian.rows() + b.jacobian.rows(), std::max(a.jacobian.cols(), b.jacobian.cols()));
  if (a.jacobian.rows() > 0) out.jacobian.topRows(a.jacobian.rows()) = a.jacobian;
  if (b.jacobian.rows() > 0) out.jacobian.bottomRows(b.jacobian.rows()) = b.jacobian;
  return out;
}

template <class Family>
Index count_rows(const Family& family) {
  Index r = 0;
  for (const auto& c : family) r += c->rows();
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------

double total_variation(const Eigen::Ref<const Vector>& x) {
  require(x.size() >= 2, "total_variation: need at least two entries");
  double tv = 0.0;
  for (Index i = 0; i + 1 < x.size(); ++i) tv += std::abs(x[i + 1] - x[i]);
  return tv;
}

Vector total_variation_gradient(const Eigen::Ref<const Vector>& x) {
  require(x.size() >= 2, "total_variation_gradient: need at least two entries");
  Vector g = Vector::Zero(x.size());
  for (Index i = 0; i + 1 < x.size(); ++i) {
    const double s = sgn(x[i + 1] - x[i]);
    g[i + 1] += s;
    g[i] -= s;
  }
  return g;
}

double tvd_value(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& xdot) {
  require(x.size() == xdot.size() && x.size() >= 2, "tvd_value: need equal lengths >= 2");
  double s = 0.0;
  for (Index i = 0; i + 1 < x.size(); ++i) s -= sgn(x[i + 1] - x[i]) * (xdot[i + 1] - xdot[i]);
  return s;
}

double tvb_value(const Eigen::Ref<const Vector>& x, double bound) { return bound - total_variation(x); }

double ec_value(const EnergyGradientFn& energy_gradient, const Vector& xdot, const EnergySourceFn& source,
                const Vector& x, double tau, const ParamVector& mu) {
  const Vector g = energy_gradient(x);
  require(g.size() == xdot.size(), "ec_value: gradient/velocity length mismatch");
  return g.dot(xdot) - source(tau, mu);
}

// ---------------------------------------------------------------------------

RsumConstraint::RsumConstraint(std::shared_ptr<const FullOrderModel> model, Matrix c)
    : model_(std::move(model)), c_(std::move(c)) {
  require(model_ != nullptr, "RsumConstraint: model is required");
  require(c_.cols() == model_->dim(), "RsumConstraint: C must have N columns");
  require(c_.allFinite(), "RsumConstraint: C must be finite");
}

DynamicEval RsumConstraint::evaluate(const Vector& v, const Vector& x, double t, const ParamVector& mu,
                                     bool want_state_derivative) const {
  DynamicEval e;
  e.value = c_ * continuous_residual(*model_, v, x, t, mu);
  e.d_velocity = c_;
  if (want_state_derivative) {
    const SparseMatrix jac = model_->velocity_jacobian(x, t, mu);
    e.d_state = -(c_ * jac);
  }
  return e;
}

TvdConstraint::TvdConstraint(FieldLayout layout) : layout_(std::move(layout)) {
  require(layout_.size() > 0, "TvdConstraint: empty field layout");
}

DynamicEval TvdConstraint::evaluate(const Vector& v, const Vector& x, double, const ParamVector&,
                                    bool want_state_derivative) const {
  require(x.size() == layout_.dim() && v.size() == layout_.dim(), "TvdConstraint: state length mismatch");
  const Index rows = this->rows();
  DynamicEval e;
  e.value.resize(rows);
  e.d_velocity = Matrix::Zero(rows, x.size());
  for (Index r = 0; r < rows; ++r) {
    const auto& f = layout_[static_cast<std::size_t>(r)];
    const Vector g = total_variation_gradient(x.segment(f.offset, f.length));
    e.value[r] = -g.dot(v.segment(f.offset, f.length));
    e.d_velocity.row(r).segment(f.offset, f.length) = -g.transpose();
  }
  // Piecewise constant sign pattern: zero state derivative away from kinks.
  if (want_state_derivative) e.d_state = Matrix::Zero(rows, x.size());
  return e;
}

TvbConstraint::TvbConstraint(FieldLayout layout, std::vector<double> bounds)
    : layout_(std::move(layout)), bounds_(std::move(bounds)) {
  require(bounds_.size() == layout_.size(), "TvbConstraint: one bound per field is required");
  for (double b : bounds_) require(b > 0.0 && std::isfinite(b), "TvbConstraint: bounds must be positive");
}

KinematicEval TvbConstraint::evaluate(const Vector& x, double, const ParamVector&) const {
  require(x.size() == layout_.dim(), "TvbConstraint: state length mismatch");
  const Index rows = this->rows();
  KinematicEval e;
  e.value.resize(rows);
  e.d_state = Matrix::Zero(rows, x.size());
  e.d_time = Vector::Zero(rows);
  for (Index r = 0; r < rows; ++r) {
    const auto& f = layout_[static_cast<std::size_t>(r)];
    const auto seg = x.segment(f.offset, f.length);
    e.value[r] = tvb_value(seg, bounds_[static_cast<std::size_t>(r)]);
    e.d_state.row(r).segment(f.offset, f.length) = -total_variation_gradient(seg).transpose();
  }
  return e;
}

EnergyConstraint::EnergyConstraint(EnergyGradientFn gradient, EnergySourceFn source, HessianFn hessian)
    : gradient_(std::move(gradient)), source_(std::move(source)), hessian_(std::move(hessian)) {
  require(gradient_ && source_, "EnergyConstraint: gradient and source are required");
}

DynamicEval EnergyConstraint::evaluate(const Vector& v, const Vector& x, double t, const ParamVector& mu,
                                       bool want_state_derivative) const {
  DynamicEval e;
  const Vector g = gradient_(x);
  require(g.size() == v.size(), "EnergyConstraint: gradient/velocity length mismatch");
  e.value = Vector::Constant(1, g.dot(v) - source_(t, mu));
  e.d_velocity = g.transpose();
  if (want_state_derivative) {
    e.d_state = hessian_ ? Matrix((hessian_(x).transpose() * v).transpose()) : Matrix::Zero(1, x.size());
  }
  return e;
}

// ---------------------------------------------------------------------------

bool ConstraintSet::empty() const { return kin_eq.empty() && dyn_eq.empty() && kin_ineq.empty() && dyn_ineq.empty(); }
Index ConstraintSet::kin_eq_rows() const { return count_rows(kin_eq); }
Index ConstraintSet::dyn_eq_rows() const { return count_rows(dyn_eq); }
Index ConstraintSet::kin_ineq_rows() const { return count_rows(kin_ineq); }
Index ConstraintSet::dyn_ineq_rows() const { return count_rows(dyn_ineq); }

std::string ConstraintSet::describe() const {
  std::ostringstream os;
  bool first = true;
  auto add = [&](const auto& family) {
    for (const auto& c : family) {
      os << (first ? "" : "+") << c->name();
      first = false;
    }
  };
  add(kin_eq);
  add(dyn_eq);
  add(kin_ineq);
  add(dyn_ineq);
  if (first) os << "none";
  return os.str();
}

ConstraintBlock GalerkinConstraintEval::equalities() const { return stack(kin_eq, dyn_eq); }

ConstraintBlock GalerkinConstraintEval::inequalities() const {
  const Index p = dyn_ineq.jacobian.cols();
  ConstraintBlock act{Vector(active_count()), Matrix(active_count(), p)};
  Index r = 0;
  for (std::size_t i = 0; i < active.size(); ++i) {
    if (!active[i]) continue;
    act.value[r] = kin_ineq.value[static_cast<Index>(i)];
    act.jacobian.row(r) = kin_ineq.jacobian.row(static_cast<Index>(i));
    ++r;
  }
  return stack(act, dyn_ineq);
}

Index GalerkinConstraintEval::active_count() const {
  Index c = 0;
  for (bool a : active) c += a ? 1 : 0;
  return c;
}

ConstraintBlock LspgConstraintEval::equalities() const { return stack(kin_eq, dyn_eq); }
ConstraintBlock LspgConstraintEval::inequalities() const { return stack(kin_ineq, dyn_ineq); }

namespace {

// Galerkin linearization: dcbar/dx Phi vhat + dcbar/dt, Jacobian dcbar/dx Phi.
ConstraintBlock galerkin_kinematic(const std::vector<std::shared_ptr<const KinematicConstraint>>& family,
                                   const Matrix& phi, const Vector& vhat, const Vector& x, double tau,
                                   const ParamVector& mu, Vector* state_values) {
  ConstraintBlock out = empty_block(phi.cols());
  Vector state_vals(0);
  for (const auto& c : family) {
    const KinematicEval e = c->evaluate(x, tau, mu);
    require(e.value.size() == c->rows(), c->name() + ": row count mismatch");
    const Matrix jac = e.d_state * phi;
    ConstraintBlock blk{jac * vhat + e.d_time, jac};
    out = stack(out, blk);
    Vector sv(state_vals.size() + e.value.size());
    sv << state_vals, e.value;
    state_vals = std::move(sv);
  }
  if (state_values) *state_values = std::move(state_vals);
  return out;
}

ConstraintBlock galerkin_dynamic(const std::vector<std::shared_ptr<const DynamicConstraint>>& family,
                                 const Matrix& phi, const Vector& v, const Vector& x, double tau,
                                 const ParamVector& mu) {
  ConstraintBlock out = empty_block(phi.cols());
  for (const auto& c : family) {
    const DynamicEval e = c->evaluate(v, x, tau, mu, false);
    require(e.value.size() == c->rows(), c->name() + ": row count mismatch");
    out = stack(out, {e.value, e.d_velocity * phi});
  }
  return out;
}

}  // namespace

GalerkinConstraintEval eval_galerkin_constraints(const ConstraintSet& set, const ReducedBasis& basis,
                                                 const Vector& x_ref, const Vector& vhat, const Vector& xhat,
                                                 double tau, const ParamVector& mu) {
  require(vhat.size() == basis.p() && xhat.size() == basis.p(), "eval_galerkin_constraints: reduced size mismatch");
  require(x_ref.size() == basis.n(), "eval_galerkin_constraints: reference length mismatch");
  const Matrix& phi = basis.phi();
  const Vector x = x_ref + phi * xhat;
  const Vector v = phi * vhat;
  GalerkinConstraintEval out;
  out.kin_eq = galerkin_kinematic(set.kin_eq, phi, vhat, x, tau, mu, nullptr);
  out.dyn_eq = galerkin_dynamic(set.dyn_eq, phi, v, x, tau, mu);
  out.kin_ineq = galerkin_kinematic(set.kin_ineq, phi, vhat, x, tau, mu, &out.kin_ineq_state_value);
  out.dyn_ineq = galerkin_dynamic(set.dyn_ineq, phi, v, x, tau, mu);
  out.active.resize(static_cast<std::size_t>(out.kin_ineq_state_value.size()));
  for (Index i = 0; i < out.kin_ineq_state_value.size(); ++i)
    out.active[static_cast<std::size_t>(i)] = out.kin_ineq_state_value[i] <= set.activation_tol;
  return out;
}

LspgConstraintEval eval_lspg_constraints(const ConstraintSet& set, const ReducedBasis& basis, const Vector& x_ref,
                                         const LinearMultistepScheme& scheme, const StateHistory& history,
                                         const Vector& xihat, int n, const ParamVector& mu) {
  require(xihat.size() == basis.p(), "eval_lspg_constraints: reduced size mismatch");
  require(x_ref.size() == basis.n(), "eval_lspg_constraints: reference length mismatch");
  require(n >= 1 && n <= scheme.n_steps(), "eval_lspg_constraints: step index out of range");
  const Matrix& phi = basis.phi();
  const Index p = basis.p();
  const Vector x = x_ref + phi * xihat;
  const double tn = scheme.time(n);
  const int q = scheme.q();
  const AffineVelocityMap vmap = discrete_velocity_map(scheme, history);
  const Vector vbar = vmap.slope * x + vmap.offset;
  const Vector& xq = q == 0 ? x : history.state(q);
  const double tq = scheme.time(n - q);

  auto kinematic = [&](const auto& family) {
    ConstraintBlock out = empty_block(p);
    for (const auto& c : family) {
      const KinematicEval e = c->evaluate(x, tn, mu);
      require(e.value.size() == c->rows(), c->name() + ": row count mismatch");
      out = stack(out, {e.value, e.d_state * phi});
    }
    return out;
  };
  auto dynamic = [&](const auto& family) {
    ConstraintBlock out = empty_block(p);
    for (const auto& c : family) {
      const DynamicEval e = c->evaluate(vbar, xq, tq, mu, q == 0);
      require(e.value.size() == c->rows(), c->name() + ": row count mismatch");
      Matrix dfull = vmap.slope * e.d_velocity;
      if (q == 0) dfull += e.d_state;
      out = stack(out, {e.value, dfull * phi});
    }
    return out;
  };

  LspgConstraintEval out;
  out.kin_eq = kinematic(set.kin_eq);
  out.dyn_eq = dynamic(set.dyn_eq);
  out.kin_ineq = kinematic(set.kin_ineq);
  out.dyn_ineq = dynamic(set.dyn_ineq);
  return out;
}

}  // namespace cgrom
