#include <cmath>
#include <memory>
#include <random>

#include <gtest/gtest.h>

#include "cgrom/metrics.hpp"
#include "cgrom/models.hpp"
#include "cgrom/projection.hpp"
#include "support.hpp"

namespace cgrom {
namespace {

RomConfig make_config(const ReducedBasis& basis, ReferenceState ref, const LinearMultistepScheme& scheme,
                      ProjectionKind kind, ConstraintSet constraints = {}) {
  return RomConfig{basis, std::move(ref), scheme, std::move(constraints), kind, {}, {}, {}};
}

ReducedBasis training_basis(const FullOrderModel& model, const LinearMultistepScheme& scheme,
                            const std::vector<ParamVector>& training, Index p) {
  SnapshotMatrix snaps;
  for (const auto& mu : training) snaps.append_run(solve_fom(model, scheme, mu), model.initial_state(mu));
  return pod(snaps, p);
}

// f(x) = A x + b with a fixed stable A.
struct LinearSystem {
  Matrix a;
  Vector b;
  std::shared_ptr<FunctionModel> model;

  explicit LinearSystem(Index n) {
    std::mt19937_64 rng(41);
    const Matrix m = test::random_matrix(n, n, rng);
    a = -(m * m.transpose()) / static_cast<double>(n) - Matrix::Identity(n, n) + 0.3 * (m - m.transpose());
    b = test::random_vector(n, rng);
    const Matrix aa = a;
    const Vector bb = b;
    model = std::make_shared<FunctionModel>(
        "linear", n, 0, 1.0, [aa, bb](const Vector& x, double, const ParamVector&) { return Vector(aa * x + bb); },
        [aa](const Vector&, double, const ParamVector&) { return SparseMatrix(aa.sparseView()); },
        [n](const ParamVector&) { return Vector::LinSpaced(n, -1.0, 1.0).eval(); });
  }
};

TEST(Galerkin, VelocityIsProjectedVelocity) {
  const auto model = std::make_shared<BurgersModel>(30);
  std::mt19937_64 rng(42);
  const ReducedBasis basis(test::random_orthonormal(30, 4, rng));
  const auto config = make_config(basis, ReferenceState::initial_condition(model),
                                  LinearMultistepScheme::backward_euler(30.0, 10), ProjectionKind::galerkin);
  const ParamVector mu{1.0, 0.4};
  const Vector xhat = 0.1 * test::random_vector(4, rng);
  const Vector x = model->initial_state(mu) + basis.phi() * xhat;
  const Vector fhat = galerkin_velocity(*model, config, xhat, 2.0, mu);
  EXPECT_LE((fhat - basis.phi().transpose() * model->velocity(x, 2.0, mu)).cwiseAbs().maxCoeff(), 1e-14);

  const auto res = constrained_galerkin_velocity(*model, config, xhat, 2.0, mu);
  ASSERT_TRUE(res.usable());
  EXPECT_LE((res.point - fhat).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Galerkin, ConstrainedVelocityCostsAtLeastTheProjection) {
  const auto model = std::make_shared<BurgersModel>(30);
  std::mt19937_64 rng(43);
  const ReducedBasis basis(test::random_orthonormal(30, 6, rng));
  ConstraintSet set;
  set.dyn_eq.push_back(std::make_shared<RsumConstraint>(model, Matrix::Ones(1, 30)));
  set.dyn_ineq.push_back(std::make_shared<TvdConstraint>(FieldLayout::single(30)));
  const auto config = make_config(basis, ReferenceState::initial_condition(model),
                                  LinearMultistepScheme::backward_euler(30.0, 10), ProjectionKind::galerkin, set);
  const ParamVector mu{1.0, 0.4};
  const Vector xhat = 0.2 * test::random_vector(6, rng);
  const Vector x = model->initial_state(mu) + basis.phi() * xhat;
  const Vector f = model->velocity(x, 0.0, mu);
  const auto res = constrained_galerkin_velocity(*model, config, xhat, 0.0, mu);
  ASSERT_TRUE(res.usable()) << to_string(res.status);
  const Vector v = basis.phi() * res.point;
  const double unconstrained = 0.5 * (basis.phi() * (basis.phi().transpose() * f) - f).squaredNorm();
  EXPECT_GE(0.5 * (v - f).squaredNorm(), unconstrained - 1e-12);
  EXPECT_LE(std::abs((v - f).sum()), 1e-9);
  EXPECT_GE(tvd_value(x, v), -1e-9);
}

TEST(Galerkin, BackwardEulerLinearMatchesClosedForm) {
  const LinearSystem sys(12);
  std::mt19937_64 rng(44);
  const ReducedBasis basis(test::random_orthonormal(12, 4, rng));
  const auto scheme = LinearMultistepScheme::backward_euler(1.0, 8);
  const auto config = make_config(basis, ReferenceState::initial_condition(sys.model), scheme, ProjectionKind::galerkin);
  const auto rom = simulate_rom(*sys.model, config, ParamVector{});
  ASSERT_TRUE(rom.completed) << rom.message;

  const Matrix& phi = basis.phi();
  const Vector x_ref = sys.model->initial_state(ParamVector{});
  const double dt = scheme.dt();
  const Matrix lhs = Matrix::Identity(4, 4) - dt * phi.transpose() * sys.a * phi;
  const Vector forcing = dt * phi.transpose() * (sys.a * x_ref + sys.b);
  Vector xhat = Vector::Zero(4);
  for (int n = 1; n <= scheme.n_steps(); ++n) {
    xhat = lhs.partialPivLu().solve(xhat + forcing);
    EXPECT_LE((rom.coords[static_cast<std::size_t>(n)] - xhat).cwiseAbs().maxCoeff(), 1e-10) << "step " << n;
  }
}

TEST(Lspg, BackwardEulerLinearMatchesNormalEquations) {
  const LinearSystem sys(12);
  std::mt19937_64 rng(45);
  const ReducedBasis basis(test::random_orthonormal(12, 4, rng));
  const auto scheme = LinearMultistepScheme::backward_euler(1.0, 8);
  const auto config = make_config(basis, ReferenceState::initial_condition(sys.model), scheme, ProjectionKind::lspg);
  const auto rom = simulate_rom(*sys.model, config, ParamVector{});
  ASSERT_TRUE(rom.completed) << rom.message;

  const Matrix& phi = basis.phi();
  const Vector x_ref = sys.model->initial_state(ParamVector{});
  const double dt = scheme.dt();
  const Matrix m = (Matrix::Identity(12, 12) - dt * sys.a) * phi;
  Vector xhat = Vector::Zero(4);
  for (int n = 1; n <= scheme.n_steps(); ++n) {
    const Vector prev = x_ref + phi * xhat;
    const Vector rhs = prev - x_ref + dt * (sys.a * x_ref + sys.b);
    xhat = (m.transpose() * m).ldlt().solve(m.transpose() * rhs);
    EXPECT_LE((rom.coords[static_cast<std::size_t>(n)] - xhat).cwiseAbs().maxCoeff(), 1e-9) << "step " << n;
  }
}

TEST(Projections, ExplicitGalerkinAndLspgCoincide) {
  const auto model = std::make_shared<BurgersModel>(40);
  const auto scheme = LinearMultistepScheme::explicit_euler(30.0, 300);
  const auto basis = training_basis(*model, scheme, BurgersModel::training_set(), 6);
  const ParamVector mu{1.0, 0.4};
  const auto g = simulate_rom(*model, make_config(basis, ReferenceState::initial_condition(model), scheme,
                                                  ProjectionKind::galerkin), mu);
  const auto l = simulate_rom(*model, make_config(basis, ReferenceState::initial_condition(model), scheme,
                                                  ProjectionKind::lspg), mu);
  ASSERT_TRUE(g.completed && l.completed);
  for (std::size_t n = 0; n < g.coords.size(); ++n)
    EXPECT_LE((g.coords[n] - l.coords[n]).cwiseAbs().maxCoeff(), 1e-12) << "step " << n;
}

TEST(Projections, FullBasisLspgReproducesFom) {
  const auto model = std::make_shared<BurgersModel>(20);
  const auto scheme = LinearMultistepScheme::backward_euler(30.0, 150);
  const ParamVector mu{1.2, 0.6};
  const auto fom = solve_fom(*model, scheme, mu);
  for (auto ref : {ReferenceState::zero(20), ReferenceState::initial_condition(model)}) {
    const auto config = make_config(ReducedBasis::identity(20), ref, scheme, ProjectionKind::lspg);
    const auto rom = simulate_rom(*model, config, mu);
    ASSERT_TRUE(rom.completed) << rom.message;
    const auto states = decode_trajectory(rom, config.basis, ref(mu));
    ASSERT_EQ(states.size(), fom.states.size());
    for (std::size_t n = 0; n < states.size(); ++n)
      EXPECT_LE((states[n] - fom.states[n]).cwiseAbs().maxCoeff(), 1e-8) << ref.name() << " step " << n;
  }
}

TEST(Projections, RsumHoldsEveryStep) {
  const auto model = std::make_shared<BurgersModel>(60);
  const auto scheme = LinearMultistepScheme::backward_euler(30.0, 60);
  const auto basis = training_basis(*model, scheme, BurgersModel::training_set(), 6);
  const Matrix c = Matrix::Ones(1, 60);
  ConstraintSet set;
  set.dyn_eq.push_back(std::make_shared<RsumConstraint>(model, c));
  const ParamVector mu{1.3, 0.7};
  for (auto kind : {ProjectionKind::galerkin, ProjectionKind::lspg}) {
    const auto config = make_config(basis, ReferenceState::initial_condition(model), scheme, kind, set);
    const auto rom = simulate_rom(*model, config, mu);
    ASSERT_TRUE(rom.completed) << to_string(kind) << ": " << rom.message;
    EXPECT_LE(rsum_violation_series(kind, *model, config, rom, c, mu).max(), 1e-8) << to_string(kind);
  }
}

TEST(Projections, LspgTvbHoldsEveryStep) {
  const auto model = std::make_shared<EulerModel>(40);
  const auto scheme = LinearMultistepScheme::explicit_euler(model->final_time(), 200);
  const auto layout = model->layout();
  SnapshotMatrix snaps;
  std::vector<double> bounds(3, 0.0);
  for (const auto& mu : EulerModel::training_set()) {
    const auto run = solve_fom(*model, scheme, mu);
    snaps.append_run(run, model->initial_state(mu));
    for (std::size_t n = 1; n < run.states.size(); ++n)
      for (std::size_t k = 0; k < 3; ++k)
        bounds[k] = std::max(bounds[k], 1.2 * total_variation(run.states[n].segment(layout[k].offset, layout[k].length)));
  }
  const auto basis = pod(snaps, 10);
  ConstraintSet set;
  set.kin_ineq.push_back(std::make_shared<TvbConstraint>(layout, bounds));
  auto config = make_config(basis, ReferenceState::initial_condition(model), scheme, ProjectionKind::lspg, set);
  config.solver.constraint_tol = 1e-9;
  const ParamVector mu{1.25, 1.5};
  const auto rom = simulate_rom(*model, config, mu);
  ASSERT_TRUE(rom.completed) << rom.message;
  const auto series = tvb_violation_series(rom, basis, model->initial_state(mu), bounds, layout);
  EXPECT_LE(series.back().max(), 1e-8);
}

TEST(Projections, GalerkinEnergyConstraintHoldsEveryStep) {
  const auto model = std::make_shared<DiffusionModel>(9, 1e4);
  const auto scheme = LinearMultistepScheme::backward_euler(model->final_time(), 20);
  const std::vector<ParamVector> training{{-1e5, 0.5e5, 1e-4, 0.2}, {0.5e5, -1e5, 2e-4, 0.3}};
  const auto basis = training_basis(*model, scheme, training, 5);
  const Index n = model->dim();
  ConstraintSet set;
  set.dyn_eq.push_back(std::make_shared<EnergyConstraint>(
      [n](const Vector&) { return Vector::Ones(n).eval(); },
      [](double, const ParamVector& q) { return DiffusionModel::scaled_energy_source(q); }));
  const ParamVector mu{-0.8e5, 0.8e5, 1.5e-4, 0.25};
  const auto config = make_config(basis, ReferenceState::initial_condition(model), scheme, ProjectionKind::galerkin, set);
  const auto rom = simulate_rom(*model, config, mu);
  ASSERT_TRUE(rom.completed) << rom.message;
  for (std::size_t k = 1; k < rom.velocities.size(); ++k)
    EXPECT_LE(std::abs((basis.phi() * rom.velocities[k]).sum()), 1e-10) << "step " << k;
  const auto dev = energy_deviation_series(rom, basis, model->initial_state(mu),
                                           [&](const Vector& x) { return model->energy(x); },
                                           model->initial_state(mu));
  EXPECT_LE(dev.max(), 1e-8 * model->energy(model->initial_state(mu)));
}

TEST(Projections, FailedStepEndsTrajectory) {
  const auto model = std::make_shared<BurgersModel>(40);
  const auto scheme = LinearMultistepScheme::backward_euler(30.0, 20);
  const auto basis = training_basis(*model, scheme, BurgersModel::training_set(), 5);
  ConstraintSet set;
  set.dyn_eq.push_back(std::make_shared<RsumConstraint>(model, Matrix::Ones(1, 40)));
  auto config = make_config(basis, ReferenceState::initial_condition(model), scheme, ProjectionKind::galerkin, set);
  config.hybrid.maxfev = 1;
  const auto rom = simulate_rom(*model, config, ParamVector{1.3, 0.7});
  EXPECT_FALSE(rom.completed);
  EXPECT_EQ(rom.failed_step, 1);
  EXPECT_FALSE(rom.message.empty());
  EXPECT_EQ(rom.coords.size(), 1u);
}

TEST(RomConfigValidation, RejectsMultistepAndMismatchedBasis) {
  const auto model = std::make_shared<BurgersModel>(10);
  const LinearMultistepScheme bdf2({1.0, -4.0 / 3.0, 1.0 / 3.0}, {2.0 / 3.0, 0.0, 0.0}, 1.0, 4);
  EXPECT_THROW(make_config(ReducedBasis::identity(10), ReferenceState::zero(10), bdf2, ProjectionKind::lspg)
                   .validate(*model),
               ContractViolation);
  EXPECT_THROW(make_config(ReducedBasis::identity(9), ReferenceState::zero(9),
                           LinearMultistepScheme::backward_euler(1.0, 2), ProjectionKind::lspg)
                   .validate(*model),
               ContractViolation);
  EXPECT_EQ(parse_projection_kind("lspg"), ProjectionKind::lspg);
  EXPECT_THROW((void)parse_projection_kind("petrov"), ContractViolation);
}

}  // namespace
}  // namespace cgrom
