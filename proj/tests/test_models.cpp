#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cgrom/models.hpp"
#include "support.hpp"

namespace cgrom {
namespace {

template <class Model>
double jacobian_fd_error(const Model& model, const Vector& x, double t, const ParamVector& mu) {
  const auto f = [&](const Vector& y) { return model.velocity(y, t, mu); };
  const Matrix fd = test::fd_jacobian(f, x);
  return test::relative_difference(Matrix(model.velocity_jacobian(x, t, mu)), fd);
}

TEST(Burgers, TwoCellFluxBalance) {
  // dz = 1, inflow 1: f_0 = -(2 - 0.5), f_1 = -(4.5 - 2).
  const BurgersModel model(2, 2.0, 1.0);
  const Vector f = model.velocity(Vector{{2.0, 3.0}}, 0.0, ParamVector{1.0, 0.0});
  EXPECT_DOUBLE_EQ(f[0], -1.5);
  EXPECT_DOUBLE_EQ(f[1], -2.5);
}

TEST(Burgers, InitialStateAndInflow) {
  const BurgersModel model;
  const ParamVector mu{1.3, 0.7};
  EXPECT_DOUBLE_EQ(BurgersModel::inflow(mu), 2.4);
  const Vector x0 = model.initial_state(mu);
  ASSERT_EQ(x0.size(), 200);
  // First cell centre z = 0.25.
  EXPECT_NEAR(x0[0], 0.7 * std::cos(2.0 * M_PI * 1.3 * 0.25 / 100.0) + 1.7, 1e-15);
  EXPECT_GE(x0.minCoeff(), 1.0 - 1e-12);
  EXPECT_LE(x0.maxCoeff(), 2.4 + 1e-12);
}

TEST(Burgers, JacobianMatchesFiniteDifferences) {
  const BurgersModel model(50);
  std::mt19937_64 rng(1);
  for (const auto& mu : BurgersModel::training_set()) {
    const Vector x = model.initial_state(mu) + 0.3 * test::random_vector(model.dim(), rng);
    EXPECT_LE(jacobian_fd_error(model, x, 0.0, mu), 1e-6) << mu.to_string();
  }
}

TEST(Euler, TwoNodeHandExpansion) {
  const EulerModel model(2, 2.0, 1.0);
  const ParamVector mu{1.0, 1.0};
  Vector x(6);
  x << 401.0, 402.0, 101010.0, 101030.0, 1.5, 2.0;
  const Vector f = model.velocity(x, 0.0, mu);
  EXPECT_NEAR(f[0], -416.0, 1e-9);
  EXPECT_NEAR(f[1], -442.0, 1e-9);
  EXPECT_NEAR(f[2], -145424.0, 1e-8);
  EXPECT_NEAR(f[3], -149482.0, 1e-8);
  EXPECT_NEAR(f[4], -199.0, 1e-9);
  EXPECT_NEAR(f[5], -199.0, 1e-9);
}

TEST(Euler, InflowIsSupersonicOverTrainingBox) {
  for (const auto& mu : EulerModel::training_set()) {
    const Eigen::Vector3d bc = EulerModel::inflow(mu);
    const double c = std::sqrt(EulerModel::kGamma * bc[1] * bc[2]);
    EXPECT_GT(bc[0], c) << mu.to_string();
  }
}

TEST(Euler, LayoutHasThreeFields) {
  const EulerModel model(10);
  const auto layout = model.layout();
  ASSERT_EQ(layout.size(), 3u);
  EXPECT_EQ(layout[0].name, "u");
  EXPECT_EQ(layout[1].name, "p");
  EXPECT_EQ(layout[2].name, "v");
  EXPECT_EQ(layout[2].offset, 20);
  EXPECT_EQ(layout.dim(), model.dim());
}

TEST(Euler, JacobianMatchesFiniteDifferences) {
  const EulerModel model(20);
  std::mt19937_64 rng(2);
  for (const auto& mu : EulerModel::training_set()) {
    Vector x = model.initial_state(mu);
    const Index n = model.nodes();
    x.segment(0, n) += 5.0 * test::random_vector(n, rng);
    x.segment(n, n) += 2000.0 * test::random_vector(n, rng);
    x.segment(2 * n, n) += 0.05 * test::random_vector(n, rng);
    EXPECT_LE(jacobian_fd_error(model, x, 0.0, mu), 1e-6) << mu.to_string();
  }
}

TEST(Diffusion, ThreeByThreeHotCentre) {
  // h = 1/2, face conductivity (60 + 50) / 2 = 55, flux 55 * 10 / h^2 = 2200 per face.
  const DiffusionModel model(3, 1.0);
  Vector x = Vector::Constant(9, 300.0);
  x[4] = 310.0;
  const Vector f = model.velocity(x, 0.0, ParamVector{0.0, 0.0, 1e-4, 0.2});
  const double rc = DiffusionModel::rho_c();
  EXPECT_NEAR(f[4], -8800.0 / rc, 1e-18);
  for (Index k : {1, 3, 5, 7}) EXPECT_NEAR(f[k], 2200.0 / rc, 1e-18);
  for (Index k : {0, 2, 6, 8}) EXPECT_EQ(f[k], 0.0);
}

TEST(Diffusion, SourceNodesFollowTheSwing) {
  const DiffusionModel model;
  const ParamVector mu = DiffusionModel::online_point();
  // t = 0: y = 0.5 -> 16; z = 0.2 -> 6.4 -> 6, z = 0.5 -> 16.
  auto [a, b] = model.source_nodes(0.0, mu);
  EXPECT_EQ(a, 6 * 33 + 16);
  EXPECT_EQ(b, 16 * 33 + 16);
  // sin = 1 at t = 1 / (4 mu_3): y = 0.7 -> 22.4 -> 22 and y = 0.3 -> 9.6 -> 10.
  std::tie(a, b) = model.source_nodes(2500.0, mu);
  EXPECT_EQ(a, 6 * 33 + 22);
  EXPECT_EQ(b, 16 * 33 + 10);
}

TEST(Diffusion, WallsAreAdiabatic) {
  const DiffusionModel model(9, 1.0);
  std::mt19937_64 rng(3);
  const Vector x = Vector::Constant(model.dim(), 300.0) + 20.0 * test::random_vector(model.dim(), rng);
  const ParamVector mu{-2.0e5, 5.0e5, 1e-4, 0.2};
  const double total = model.velocity(x, 123.0, mu).sum();
  EXPECT_NEAR(total, DiffusionModel::scaled_energy_source(mu), 1e-15);
  const Vector dx = Vector::Constant(model.dim(), 1.0);
  EXPECT_NEAR(model.energy(x + dx) - model.energy(x), DiffusionModel::rho_c(), 1e-6);
}

TEST(Diffusion, JacobianMatchesFiniteDifferences) {
  const DiffusionModel model(9, 1.0);
  std::mt19937_64 rng(4);
  for (const auto& mu : DiffusionModel::training_set()) {
    const Vector x = Vector::Constant(model.dim(), 300.0) + 15.0 * test::random_vector(model.dim(), rng);
    EXPECT_LE(jacobian_fd_error(model, x, 300.0, mu), 1e-6) << mu.to_string();
  }
}

TEST(Diffusion, RsumRowsOverlap) {
  const DiffusionModel model;
  const Matrix c = model.rsum_matrix();
  ASSERT_EQ(c.rows(), 2);
  ASSERT_EQ(c.cols(), 1089);
  EXPECT_EQ(c.row(0).sum(), 595.0);
  EXPECT_EQ(c.row(1).sum(), 1089.0 - 495.0);
  EXPECT_EQ(c.row(0).cwiseProduct(c.row(1)).sum(), 100.0);
  EXPECT_THROW((void)DiffusionModel(5).rsum_matrix(), ContractViolation);
}

TEST(Models, TrainingSetsAndParameterChecks) {
  EXPECT_EQ(BurgersModel::training_set().size(), 4u);
  EXPECT_EQ(EulerModel::training_set().size(), 4u);
  EXPECT_EQ(DiffusionModel::training_set().size(), 8u);
  const BurgersModel model(10);
  EXPECT_THROW((void)model.velocity(Vector::Ones(10), 0.0, ParamVector{1.0}), ContractViolation);
  EXPECT_THROW((void)model.velocity(Vector::Ones(9), 0.0, ParamVector{1.0, 0.5}), ContractViolation);
  EXPECT_THROW(BurgersModel(1), ContractViolation);
}

}  // namespace
}  // namespace cgrom
