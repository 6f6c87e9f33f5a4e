#include <benchmark/benchmark.h>

#include <limits>
#include <memory>
#include <vector>

#include "cylheat/parametrix.hpp"
#include "cylheat/simulate.hpp"
#include "cylheat/stable.hpp"

using namespace cylheat;

namespace {

std::shared_ptr<const ParametrixContext> smooth_context(double alpha, int nodes) {
    const auto p = ModelParams::make(alpha, 2, 1.0, 1.0, 1.2, 0.1, 1.0);
    QuadratureScheme sc;
    sc.space.nodes = nodes;
    return std::make_shared<ParametrixContext>(CoefficientField::smooth_periodic(p, 1.0), sc);
}

void BM_StableDensity(benchmark::State& state) {
    const double alpha = state.range(0) / 10.0;
    const auto ev = StableEvaluator::shared(alpha);
    double x = -20.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(ev->density(0.7, x));
        x = x > 20.0 ? -20.0 : x + 0.013;
    }
}
BENCHMARK(BM_StableDensity)->Arg(6)->Arg(10)->Arg(15);

void BM_Q0ClosedForm(benchmark::State& state) {
    const auto ctx = smooth_context(1.0, 41);
    const std::vector<double> x = {0.8, 0.1}, y = {0.3, -0.2};
    for (auto _ : state) benchmark::DoNotOptimize(q0(*ctx, 0.5, x, y));
}
BENCHMARK(BM_Q0ClosedForm);

void BM_Q0JumpIntegral(benchmark::State& state) {
    const auto ctx = smooth_context(1.0, 41);
    const std::vector<double> x = {0.8, 0.1}, y = {0.3, -0.2};
    for (auto _ : state) benchmark::DoNotOptimize(q0_quadrature(*ctx, 0.5, x, y).value);
}
BENCHMARK(BM_Q0JumpIntegral);

void BM_BackwardSlice(benchmark::State& state) {
    const auto ctx = smooth_context(1.0, static_cast<int>(state.range(0)));
    const std::vector<double> y = {0.0, 0.0};
    for (auto _ : state) {
        BackwardSlice s(ctx, y, {0.5});
        benchmark::DoNotOptimize(s.summary().n_used);
    }
}
BENCHMARK(BM_BackwardSlice)->Arg(21)->Arg(41)->Unit(benchmark::kSecond)->Iterations(1);

void BM_SliceEvaluate(benchmark::State& state) {
    const auto ctx = smooth_context(1.0, 21);
    const BackwardSlice s(ctx, {0.0, 0.0}, {0.5});
    const std::vector<double> x = {0.4, -0.7};
    for (auto _ : state) benchmark::DoNotOptimize(s.value(0.5, x));
}
BENCHMARK(BM_SliceEvaluate);

void BM_ForwardMass(benchmark::State& state) {
    const auto ctx = smooth_context(1.0, 21);
    const ForwardSlice f(ctx, {0.0, 0.0}, {0.5});
    const double inf = std::numeric_limits<double>::infinity();
    const std::vector<double> w = {inf, inf};
    for (auto _ : state) benchmark::DoNotOptimize(f.mass(0.5, w));
}
BENCHMARK(BM_ForwardMass);

void BM_EulerPaths(benchmark::State& state) {
    const auto p = ModelParams::make(1.0, 2, 1.0, 1.0, 1.2, 0.1, 1.0);
    const auto field = CoefficientField::smooth_periodic(p, 1.0);
    SimulationSpec s;
    s.x0 = {0.0, 0.0};
    s.n_paths = 10000;
    s.n_steps = 64;
    for (auto _ : state) benchmark::DoNotOptimize(euler_paths(field, s).terminal.data());
    state.SetItemsProcessed(state.iterations() * s.n_paths * s.n_steps);
}
BENCHMARK(BM_EulerPaths)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
