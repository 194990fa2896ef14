#include <gtest/gtest.h>

#include <omp.h>

#include <random>

#include "sindy/ensemble.hpp"
#include "sindy/model.hpp"
#include "sindy/systems.hpp"

using namespace sindy;

namespace {

// Oversubscribe so the parallel paths really split work even on one core.
class Parallel : public ::testing::Test {
protected:
    void SetUp() override {
        saved_ = omp_get_max_threads();
        omp_set_num_threads(4);
    }
    void TearDown() override { omp_set_num_threads(saved_); }
    int saved_ = 1;
};

Dataset noisy_field() {
    KSSpec s;
    s.n_grid = 128;
    s.length = 22.0;
    s.n_saves = 40;
    s.burn_in = 5.0;
    return generate(BenchmarkSpec{s, 0.01, 6}).data;
}

Problem random_problem(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Problem p;
    p.theta = Eigen::MatrixXd::NullaryExpr(300, 12, [&] { return nd(rng); });
    Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(12, 3);
    xi(1, 0) = 2.0;
    xi(4, 1) = -1.5;
    xi(7, 2) = 0.8;
    xi(2, 2) = 1.1;
    p.targets = p.theta * xi + 0.01 * Eigen::MatrixXd::NullaryExpr(300, 3, [&] { return nd(rng); });
    return p;
}

}  // namespace

TEST_F(Parallel, DifferentiateField) {
    const Dataset d = noisy_field();
    for (const DiffMethod& m : {DiffMethod{FiniteDifference{4}}, DiffMethod{SavitzkyGolay{}}, DiffMethod{Spectral{1.0}}}) {
        for (int axis : {0, kTimeAxis}) {
            if (axis == kTimeAxis && std::holds_alternative<Spectral>(m)) continue;
            const auto a = differentiate_field(d.grid(), d.states(), 1, m, axis, 2, Execution::serial);
            const auto b = differentiate_field(d.grid(), d.states(), 1, m, axis, 2, Execution::parallel);
            EXPECT_EQ(a, b) << to_string(m) << " axis " << axis;
        }
    }
}

TEST_F(Parallel, EvaluateLibraries) {
    const Dataset d = noisy_field();
    const auto pde = make_library(PDELibrary{4, {0}, make_library(PolynomialLibrary{2, true, true})});
    WeakPDELibrary w;
    w.derivative_order = 2;
    w.axes = {0};
    w.functions = make_library(PolynomialLibrary{2, true, true});
    w.n_subdomains = 40;
    w.time_window = 9;
    w.space_window = {15};
    for (const auto& lib : {pde, make_library(w)}) {
        const auto a = evaluate(*lib, d, Spectral{}, SavitzkyGolay{}, Execution::serial);
        const auto b = evaluate(*lib, d, Spectral{}, SavitzkyGolay{}, Execution::parallel);
        EXPECT_EQ(a.names, b.names);
        EXPECT_TRUE(a.values.cwiseEqual(b.values).all());
        EXPECT_EQ(a.weak_lhs.has_value(), b.weak_lhs.has_value());
        if (a.weak_lhs) EXPECT_TRUE(a.weak_lhs->cwiseEqual(*b.weak_lhs).all());
    }
}

TEST_F(Parallel, Solvers) {
    const Problem p = random_problem(1);
    for (const OptimizerSpec& o : {OptimizerSpec{STLSQ{}}, OptimizerSpec{SR3{}}, OptimizerSpec{SSR{}}, OptimizerSpec{FROLS{}}}) {
        const auto a = solve(p, o, Execution::serial);
        const auto b = solve(p, o, Execution::parallel);
        EXPECT_TRUE(a.xi.cwiseEqual(b.xi).all()) << name_of(o);
    }
}

TEST_F(Parallel, Ensemble) {
    const Problem p = random_problem(2);
    EnsembleSpec e;
    e.n_models = 16;
    e.n_library_drop = 1;
    e.seed = 3;
    const auto a = fit_ensemble(p, STLSQ{}, e, Execution::serial);
    const auto b = fit_ensemble(p, STLSQ{}, e, Execution::parallel);
    EXPECT_TRUE(a.aggregate.xi.cwiseEqual(b.aggregate.xi).all());
    EXPECT_TRUE(a.inclusion_probability.cwiseEqual(b.inclusion_probability).all());
    ASSERT_EQ(a.members.size(), b.members.size());
    for (std::size_t i = 0; i < a.members.size(); ++i) EXPECT_TRUE(a.members[i].cwiseEqual(b.members[i]).all());
}

TEST_F(Parallel, FitEndToEnd) {
    const auto bench = generate(BenchmarkSpec{LorenzSpec{}, 0.01, 1});
    FitOptions serial;
    serial.exec = Execution::serial;
    const auto a = fit(bench.data, bench.library, DiffSettings{}, STLSQ{}, EnsembleSpec{}, serial);
    const auto b = fit(bench.data, bench.library, DiffSettings{}, STLSQ{}, EnsembleSpec{});
    EXPECT_TRUE(a.coefficients.xi.cwiseEqual(b.coefficients.xi).all());
}
