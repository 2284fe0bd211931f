#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include "cgrom/basis.hpp"
#include "cgrom/constraints.hpp"
#include "cgrom/fom.hpp"
#include "cgrom/models.hpp"
#include "cgrom/projection.hpp"
#include "cgrom/solvers.hpp"

namespace {

using namespace cgrom;

void BM_DenseQp(benchmark::State& state) {
  const auto n = static_cast<Index>(state.range(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  Matrix m(n, n);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  const Matrix h = m.transpose() * m + Matrix::Identity(n, n);
  Vector g(n);
  for (Index i = 0; i < n; ++i) g[i] = normal(rng);
  Matrix a(2 * n, n);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  const Vector b = Vector::Ones(2 * n);
  for (auto _ : state) benchmark::DoNotOptimize(solve_qp(h, g, Matrix(0, n), Vector(0), a, b));
}
BENCHMARK(BM_DenseQp)->Arg(10)->Arg(20)->Arg(40);

void BM_SqpHs71(benchmark::State& state) {
  FunctionNlp nlp(
      4, [](const Vector& x) { return x[0] * x[3] * (x[0] + x[1] + x[2]) + x[2]; },
      [](const Vector& x) {
        return Vector{{x[3] * (2 * x[0] + x[1] + x[2]), x[0] * x[3], x[0] * x[3] + 1, x[0] * (x[0] + x[1] + x[2])}};
      });
  nlp.equalities(
      1, [](const Vector& x) { return Vector{{x.squaredNorm() - 40.0}}; },
      [](const Vector& x) { return Matrix(2.0 * x.transpose()); });
  nlp.inequalities(
      9,
      [](const Vector& x) {
        Vector v(9);
        v[0] = x.prod() - 25.0;
        v.segment(1, 4) = x.array() - 1.0;
        v.segment(5, 4) = 5.0 - x.array();
        return v;
      },
      [](const Vector& x) {
        Matrix j = Matrix::Zero(9, 4);
        for (Index i = 0; i < 4; ++i) j(0, i) = x.prod() / x[i];
        j.block(1, 0, 4, 4) = Matrix::Identity(4, 4);
        j.block(5, 0, 4, 4) = -Matrix::Identity(4, 4);
        return j;
      });
  SolverOptions opts;
  opts.warm_start = Vector{{1.0, 5.0, 5.0, 1.0}};
  for (auto _ : state) benchmark::DoNotOptimize(solve_nlp(nlp, opts));
}
BENCHMARK(BM_SqpHs71);

void BM_BurgersFom(benchmark::State& state) {
  const BurgersModel model;
  const auto scheme = LinearMultistepScheme::backward_euler(model.final_time(), 150);
  for (auto _ : state) benchmark::DoNotOptimize(solve_fom(model, scheme, {1.3, 0.7}));
}
BENCHMARK(BM_BurgersFom)->Unit(benchmark::kMillisecond);

struct BurgersRom {
  std::shared_ptr<BurgersModel> model = std::make_shared<BurgersModel>();
  LinearMultistepScheme scheme = LinearMultistepScheme::backward_euler(model->final_time(), 150);
  ReducedBasis basis;

  BurgersRom() : basis(make_basis()) {}

  ReducedBasis make_basis() const {
    SnapshotMatrix snaps;
    for (const auto& mu : BurgersModel::training_set())
      snaps.append_run(solve_fom(*model, scheme, mu), model->initial_state(mu));
    return pod(snaps, 10);
  }

  static const BurgersRom& get() {
    static const BurgersRom rom;
    return rom;
  }
};

// Arg 0: projection (0 Galerkin, 1 LSPG).  Arg 1: constraints (0 none, 1 rsum, 2 tvd).
void BM_BurgersRom(benchmark::State& state) {
  const auto& r = BurgersRom::get();
  const auto kind = state.range(0) == 0 ? ProjectionKind::galerkin : ProjectionKind::lspg;
  ConstraintSet set;
  if (state.range(1) == 1) set.dyn_eq.push_back(std::make_shared<RsumConstraint>(r.model, Matrix::Ones(1, r.model->dim())));
  if (state.range(1) == 2) set.dyn_ineq.push_back(std::make_shared<TvdConstraint>(FieldLayout::single(r.model->dim())));
  const RomConfig config{r.basis, ReferenceState::initial_condition(r.model), r.scheme, set, kind, {}, {}, {}};
  for (auto _ : state) benchmark::DoNotOptimize(simulate_rom(*r.model, config, {1.3, 0.7}));
}
BENCHMARK(BM_BurgersRom)->ArgsProduct({{0, 1}, {0, 1, 2}})->Unit(benchmark::kMillisecond);

void BM_Pod(benchmark::State& state) {
  const auto& r = BurgersRom::get();
  SnapshotMatrix snaps;
  for (const auto& mu : BurgersModel::training_set())
    snaps.append_run(solve_fom(*r.model, r.scheme, mu), r.model->initial_state(mu));
  for (auto _ : state) benchmark::DoNotOptimize(pod(snaps, static_cast<Index>(state.range(0))));
}
BENCHMARK(BM_Pod)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
