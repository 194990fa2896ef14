// Serial reference kernels against their OpenMP versions.
#include <benchmark/benchmark.h>

#include <random>

#include "sindy/ensemble.hpp"
#include "sindy/model.hpp"
#include "sindy/systems.hpp"

using namespace sindy;

namespace {

const Dataset& ks_data() {
    static const Dataset d = [] {
        KSSpec s;
        s.n_saves = 101;
        return generate(BenchmarkSpec{s, 0.0, 0}).data;
    }();
    return d;
}

const Dataset& lorenz_data() {
    static const Dataset d = generate(BenchmarkSpec{LorenzSpec{}, 0.01, 0}).data;
    return d;
}

Execution exec_of(const benchmark::State& state) { return state.range(0) ? Execution::parallel : Execution::serial; }

void label(benchmark::State& state) { state.SetLabel(state.range(0) ? "openmp" : "serial"); }

void BM_DifferentiateSpatial(benchmark::State& state) {
    const Dataset& d = ks_data();
    for (auto _ : state) {
        benchmark::DoNotOptimize(differentiate_field(d.grid(), d.states(), 1, Spectral{}, 0, 4, exec_of(state)));
    }
    label(state);
}

void BM_DifferentiateTimeSG(benchmark::State& state) {
    const Dataset& d = ks_data();
    for (auto _ : state) {
        benchmark::DoNotOptimize(differentiate_field(d.grid(), d.states(), 1, SavitzkyGolay{}, kTimeAxis, 1, exec_of(state)));
    }
    label(state);
}

void BM_EvaluatePDELibrary(benchmark::State& state) {
    const Dataset& d = ks_data();
    const auto lib = make_library(PDELibrary{4, {0}, make_library(PolynomialLibrary{2, true, true})});
    for (auto _ : state) benchmark::DoNotOptimize(evaluate(*lib, d, Spectral{}, SavitzkyGolay{}, exec_of(state)));
    label(state);
}

void BM_EvaluateWeakLibrary(benchmark::State& state) {
    const Dataset& d = lorenz_data();
    WeakPDELibrary w;
    w.functions = make_library(PolynomialLibrary{2, true, true});
    w.n_subdomains = 400;
    w.time_window = 101;
    const auto lib = make_library(w);
    for (auto _ : state) benchmark::DoNotOptimize(evaluate(*lib, d, FiniteDifference{}, exec_of(state)));
    label(state);
}

void BM_SolveSTLSQ(benchmark::State& state) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    Problem p;
    p.theta = Eigen::MatrixXd::NullaryExpr(20000, 60, [&] { return nd(rng); });
    p.targets = Eigen::MatrixXd::NullaryExpr(20000, 4, [&] { return nd(rng); });
    for (auto _ : state) benchmark::DoNotOptimize(solve(p, STLSQ{}, exec_of(state)));
    label(state);
}

void BM_Ensemble(benchmark::State& state) {
    const auto bench = generate(BenchmarkSpec{LorenzSpec{}, 0.01, 0});
    const auto rows = assemble(bench.data, *bench.library, DiffSettings{SavitzkyGolay{51, 3}});
    Problem p;
    p.theta = rows.theta;
    p.targets = rows.targets;
    for (auto _ : state) benchmark::DoNotOptimize(fit_ensemble(p, STLSQ{0.5}, EnsembleSpec{}, exec_of(state)));
    label(state);
}

}  // namespace

BENCHMARK(BM_DifferentiateSpatial)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DifferentiateTimeSG)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluatePDELibrary)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateWeakLibrary)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SolveSTLSQ)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Ensemble)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
