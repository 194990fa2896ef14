#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sindy/error.hpp"
#include "sindy/library.hpp"

using namespace sindy;

namespace {

Dataset field(std::size_t nx, std::size_t nt, double (*f)(double, double)) {
    Grid g{Axis::linspace("t", 0.0, 0.05, nt), {Axis::linspace("x", 0.0, 2.0 * std::numbers::pi / double(nx), nx, true)}};
    std::vector<double> s;
    for (double x : g.spatial[0].values)
        for (double t : g.time.values) s.push_back(f(x, t));
    return Dataset(g, 1, s);
}

WeakPDELibrary weak(int order, int n_sub = 20) {
    WeakPDELibrary w;
    w.derivative_order = order;
    w.axes = {0};
    w.functions = make_library(PolynomialLibrary{2, true, true});
    w.n_subdomains = n_sub;
    w.test_order = 4;
    w.time_window = 9;
    w.space_window = {11};
    w.seed = 5;
    return w;
}

}  // namespace

TEST(WeakTestWeights, ProjectedDerivativeIntegratesToZero) {
    std::vector<double> x(17);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.1 * double(i) + 0.01 * double(i * i);
    for (int k = 1; k <= 3; ++k) {
        double s = 0.0;
        for (double w : weak_test_weights(x, 4, k)) s += w;
        EXPECT_NEAR(s, 0.0, 1e-12);
    }
    const std::vector<double> two{0.0, 1.0};
    EXPECT_THROW(weak_test_weights(two, 4, 0), ConfigError);
}

TEST(WeakTestWeights, IntegrationByPartsConverges) {
    // int phi q_x (direct) against -int phi_x q (by parts) for q = sin(3x)
    auto gap = [](std::size_t n) {
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = 0.2 + 1.3 * double(i) / double(n - 1);
        const auto w0 = weak_test_weights(x, 2, 0);
        const auto w1 = weak_test_weights(x, 2, 1);
        double direct = 0.0, parts = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            direct += w0[i] * 3.0 * std::cos(3.0 * x[i]);
            parts -= w1[i] * std::sin(3.0 * x[i]);
        }
        return std::abs(direct - parts);
    };
    const double e1 = gap(21), e2 = gap(41);
    EXPECT_GT(e1, 0.0);
    EXPECT_GE(e1 / e2, 4.0);
}

TEST(Weak, ConstantFieldHasZeroDerivativeTerms) {
    const Dataset d = field(64, 30, [](double, double) { return 1.7; });
    const auto lib = make_library(weak(2));
    const auto fm = evaluate(*lib, d, Spectral{});
    ASSERT_TRUE(fm.weak_lhs.has_value());
    EXPECT_LE(fm.weak_lhs->cwiseAbs().maxCoeff(), 1e-12);
    for (std::size_t c = 0; c < fm.names.size(); ++c) {
        const bool derivative = fm.names[c].find('_') != std::string::npos;
        if (derivative) EXPECT_LE(fm.values.col(Eigen::Index(c)).cwiseAbs().maxCoeff(), 1e-12) << fm.names[c];
        else EXPECT_GT(fm.values.col(Eigen::Index(c)).cwiseAbs().maxCoeff(), 1e-3) << fm.names[c];
    }
}

TEST(Weak, NamesUseConservativeForm) {
    const auto names = feature_names(*make_library(weak(1)), {1, 0});
    EXPECT_EQ(names, (std::vector<std::string>{"1", "q0", "q0^2", "q0_x", "(q0^2)_x"}));
}

TEST(Weak, AdvectionIdentity) {
    // q = sin(x - t) solves q_t = -q_x, so weak LHS = -(q0_x column)
    const Dataset d = field(128, 60, [](double x, double t) { return std::sin(x - t); });
    WeakPDELibrary w = weak(1, 30);
    w.time_window = 31;
    w.space_window = {41};
    const auto fm = evaluate(*make_library(w), d, Spectral{});
    const Eigen::VectorXd lhs = fm.weak_lhs->col(0);
    const Eigen::VectorXd qx = fm.values.col(3);
    EXPECT_LE((lhs + qx).norm(), 1e-4 * qx.norm());
}

TEST(Weak, OdeDecayIdentity) {
    // q = exp(-t) solves q_t = -q
    Grid g{Axis::linspace("t", 0.0, 0.01, 400), {}};
    std::vector<double> s;
    for (double t : g.time.values) s.push_back(std::exp(-t));
    WeakPDELibrary w;
    w.functions = make_library(PolynomialLibrary{1, false, true});
    w.n_subdomains = 15;
    w.time_window = 41;
    w.seed = 2;
    const auto fm = evaluate(*make_library(w), Dataset(g, 1, s), FiniteDifference{2});
    EXPECT_EQ(fm.values.rows(), 15);
    EXPECT_LE((fm.weak_lhs->col(0) + fm.values.col(0)).norm(), 2e-5 * fm.values.col(0).norm());
}

TEST(Weak, DeterministicUnderSeed) {
    const Dataset d = field(64, 30, [](double x, double t) { return std::cos(x) * (1 + t); });
    const auto a = evaluate(*make_library(weak(2)), d, Spectral{});
    const auto b = evaluate(*make_library(weak(2)), d, Spectral{});
    EXPECT_TRUE((a.values.array() == b.values.array()).all());
    auto other = weak(2);
    other.seed = 6;
    const auto c = evaluate(*make_library(other), d, Spectral{});
    EXPECT_FALSE((a.values.array() == c.values.array()).all());
}

TEST(Weak, Validation) {
    const Dataset d = field(64, 30, [](double, double) { return 0.0; });
    auto small = weak(1);
    small.space_window = {2};
    EXPECT_THROW(validate(*make_library(small), {1, 0}), ConfigError);
    auto big = weak(1);
    big.time_window = 31;
    EXPECT_THROW(evaluate(*make_library(big), d, Spectral{}), ConfigError);
    auto low = weak(3);
    low.test_order = 2;
    EXPECT_THROW(validate(*make_library(low), {1, 0}), ConfigError);
    EXPECT_THROW(validate(*make_library(ConcatLibrary{{make_library(weak(1))}}), {1, 0}), ConfigError);
}
