#include <benchmark/benchmark.h>

#include "rootsgd/analysis.hpp"
#include "rootsgd/baselines.hpp"
#include "rootsgd/problems.hpp"
#include "rootsgd/root_sgd.hpp"

namespace {

using namespace rootsgd;

std::shared_ptr<const NoisyQuadratic> quadratic(std::size_t d) {
  Vector spectrum(d);
  for (std::size_t i = 0; i < d; ++i)
    spectrum[i] = 0.5 + 1.5 * static_cast<double>(i) / static_cast<double>(d);
  const double scale = 0.2 / static_cast<double>(d);
  return make_noisy_quadratic(d, spectrum, scale, DenseMatrix::identity(d), 1);
}

void BM_Draw(benchmark::State& st) {
  const auto p = quadratic(static_cast<std::size_t>(st.range(0)));
  RandomStream stream(1);
  Sample xi;
  for (auto _ : st) {
    p->draw_into(stream, xi);
    benchmark::DoNotOptimize(xi.values.data());
  }
}
BENCHMARK(BM_Draw)->Arg(2)->Arg(5)->Arg(20);

void BM_RootSgdStep(benchmark::State& st) {
  const auto p = quadratic(static_cast<std::size_t>(st.range(0)));
  const StepPlan plan = make_step_plan(p->constants(), Setting::lsn,
                                       max_step_size(p->constants(), Setting::lsn));
  RandomStream stream(2);
  RootSgdState state = make_state(Vector(p->dimension(), 1.0));
  Sample xi;
  for (auto _ : st) {
    p->draw_into(stream, xi);
    advance(state, xi, *p, plan);
    benchmark::DoNotOptimize(state.theta.data());
  }
}
BENCHMARK(BM_RootSgdStep)->Arg(2)->Arg(5)->Arg(20);

void BM_SgdStep(benchmark::State& st) {
  const auto p = quadratic(static_cast<std::size_t>(st.range(0)));
  RandomStream stream(3);
  SgdState state = make_sgd_state(Vector(p->dimension(), 1.0));
  Sample xi;
  for (auto _ : st) {
    p->draw_into(stream, xi);
    sgd_step(state, xi, *p, 0.05);
    benchmark::DoNotOptimize(state.theta.data());
  }
}
BENCHMARK(BM_SgdStep)->Arg(2)->Arg(5)->Arg(20);

void BM_SolveLambda(benchmark::State& st) {
  const auto p = quadratic(static_cast<std::size_t>(st.range(0)));
  const HessianNoiseModel model = HessianNoiseModel::from_problem(*p);
  for (auto _ : st) benchmark::DoNotOptimize(solve_lambda(model, 0.05));
}
BENCHMARK(BM_SolveLambda)->Arg(2)->Arg(5)->Arg(10)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
