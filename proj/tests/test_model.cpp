#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "sindy/error.hpp"
#include "sindy/model.hpp"

using namespace sindy;
using Eigen::MatrixXd;

namespace {

// q0 = cos t, q1 = sin t solves dq0/dt = -q1, dq1/dt = q0.
Dataset rotation(double t0, std::size_t count, double dt, bool with_derivatives = false) {
    std::vector<double> t(count), s, d;
    for (std::size_t i = 0; i < count; ++i) {
        t[i] = t0 + dt * double(i);
        s.push_back(std::cos(t[i]));
        s.push_back(std::sin(t[i]));
        d.push_back(-std::sin(t[i]));
        d.push_back(std::cos(t[i]));
    }
    std::optional<std::vector<double>> deriv;
    if (with_derivatives) deriv = d;
    return Dataset(Grid{Axis::make("t", t), {}}, 2, s, 0, std::nullopt, deriv);
}

FittedModel linear_model(const MatrixXd& xi, std::size_t n_controls = 0) {
    FittedModel m;
    m.library = make_library(PolynomialLibrary{1, false, true});
    m.layout = {std::size_t(xi.cols()), n_controls};
    m.coefficients.xi = xi;
    m.coefficients.support = xi.array() != 0.0;
    m.coefficients.names = feature_names(*m.library, m.layout);
    for (Eigen::Index t = 0; t < xi.cols(); ++t) m.target_names.push_back("q" + std::to_string(t) + "_t");
    return m;
}

std::vector<double> times(double t1, std::size_t n) {
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = t1 * double(i) / double(n - 1);
    return t;
}

const auto kPoly1 = make_library(PolynomialLibrary{1, true, true});

}  // namespace

TEST(Fit, LinearSystem) {
    const Dataset d = rotation(0.0, 2001, 0.005);
    const auto m = fit(d, kPoly1, DiffSettings{}, STLSQ{0.05, 0.0, 20});
    // columns 1, q0, q1
    MatrixXd expected(3, 2);
    expected << 0, 0, 0, 1, -1, 0;
    EXPECT_LE((m.coefficients.xi - expected).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_TRUE((m.coefficients.support.array() == (expected.array() != 0.0)).all());
    EXPECT_EQ(m.target_names, (std::vector<std::string>{"q0_t", "q1_t"}));

    const MatrixXd pred = predict(m, d);
    const MatrixXd qt = computed_targets(m, d);
    EXPECT_LE(std::sqrt((pred - qt).squaredNorm() / double(pred.size())), 1e-4);
}

TEST(Fit, SplitTrajectoriesWithPrecomputedDerivatives) {
    const Dataset full = rotation(0.0, 400, 0.01, true);
    const Dataset a = slice_time(full, 0, 200), b = slice_time(full, 200, 400);
    const auto whole = fit(full, kPoly1, DiffSettings{}, STLSQ{});
    const auto parts = fit(TrajectoryCollection({a, b}), kPoly1, DiffSettings{}, STLSQ{});
    EXPECT_LE((whole.coefficients.xi - parts.coefficients.xi).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Fit, NoDifferencingAcrossTrajectories) {
    const Dataset a = rotation(0.0, 50, 0.02), b = rotation(5.0, 60, 0.02);
    const auto rows = assemble(TrajectoryCollection({a, b}), *kPoly1, DiffSettings{});
    ASSERT_EQ(rows.targets.rows(), 110);
    const auto da = differentiate_dataset(a, FiniteDifference{2}, kTimeAxis);
    const auto db = differentiate_dataset(b, FiniteDifference{2}, kTimeAxis);
    for (Eigen::Index i = 0; i < 50; ++i) EXPECT_EQ(rows.targets(i, 0), da[std::size_t(2 * i)]);
    for (Eigen::Index i = 0; i < 60; ++i) EXPECT_EQ(rows.targets(50 + i, 1), db[std::size_t(2 * i + 1)]);
}

TEST(Fit, TrajectoryOrderInvariance) {
    Dataset a = add_noise(rotation(0.0, 300, 0.01), 0.01, 1);
    Dataset b = add_noise(rotation(2.0, 200, 0.01), 0.01, 2);
    for (const OptimizerSpec& spec : {OptimizerSpec{STLSQ{}}, OptimizerSpec{SR3{}}}) {
        const auto ab = fit(TrajectoryCollection({a, b}), kPoly1, DiffSettings{}, spec);
        const auto ba = fit(TrajectoryCollection({b, a}), kPoly1, DiffSettings{}, spec);
        EXPECT_LE((ab.coefficients.xi - ba.coefficients.xi).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Fit, PredictReproducesTrainingResidual) {
    const Dataset d = add_noise(rotation(0.0, 500, 0.01), 0.02, 3);
    const auto m = fit(d, make_library(PolynomialLibrary{2, true, true}), DiffSettings{}, STLSQ{});
    const MatrixXd r = computed_targets(m, d) - predict(m, d);
    for (Eigen::Index t = 0; t < 2; ++t) {
        EXPECT_NEAR(r.col(t).norm(), m.coefficients.residuals(t), 1e-10 * m.coefficients.residuals(t));
    }
}

TEST(Fit, ControlInputs) {
    // dq/dt = -q + u with u = sin(3t): q = exp(-t) + (sin 3t - 3 cos 3t) / 10 + 0.3 exp(-t)
    std::vector<double> t(1501), s, u;
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = 0.004 * double(i);
        s.push_back(1.3 * std::exp(-t[i]) + (std::sin(3 * t[i]) - 3 * std::cos(3 * t[i])) / 10.0);
        u.push_back(std::sin(3 * t[i]));
    }
    const Dataset d(Grid{Axis::make("t", t), {}}, 1, s, 1, u);
    const auto m = fit(d, kPoly1, DiffSettings{FiniteDifference{4}}, STLSQ{0.1, 0.0, 20});
    EXPECT_EQ(m.coefficients.names, (std::vector<std::string>{"1", "q0", "u0"}));
    EXPECT_NEAR(m.coefficients.xi(1, 0), -1.0, 1e-4);
    EXPECT_NEAR(m.coefficients.xi(2, 0), 1.0, 1e-4);
    EXPECT_EQ(m.coefficients.xi(0, 0), 0.0);

    ControlSignal sig;
    sig.times = t;
    sig.values = Eigen::Map<const Eigen::VectorXd>(u.data(), Eigen::Index(u.size()));
    const auto traj = simulate(m, Eigen::VectorXd::Constant(1, s[0]), times(5.0, 51), sig);
    ASSERT_FALSE(traj.truncated);
    EXPECT_NEAR(traj.states(50, 0), s[1250], 1e-3);
}

TEST(Fit, ShapeMismatch) {
    const Dataset d = rotation(0.0, 50, 0.02);
    const auto m = fit(d, kPoly1, DiffSettings{}, STLSQ{});
    std::vector<double> tt(10), s(10, 1.0);
    for (std::size_t i = 0; i < 10; ++i) tt[i] = double(i);
    EXPECT_THROW(predict(m, Dataset(Grid{Axis::make("t", tt), {}}, 1, s)), DataError);
}

TEST(Predict, ZeroModelGivesZero) {
    const auto m = linear_model(MatrixXd::Zero(2, 2));
    EXPECT_EQ(predict(m, rotation(0.0, 20, 0.1)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Score, Definitions) {
    MatrixXd y(4, 1);
    y << 1, -1, 2, -2;
    EXPECT_DOUBLE_EQ(score_values(y, y, Metric::r2), 1.0);
    EXPECT_DOUBLE_EQ(score_values(MatrixXd::Zero(4, 1), y, Metric::r2), 0.0);
    EXPECT_DOUBLE_EQ(score_values(y.array() + 0.25, y, Metric::rmse), 0.25);
    EXPECT_THROW(score_values(y, MatrixXd::Constant(4, 1, 3.0), Metric::r2), DataError);
}

TEST(Simulate, ConstantModel) {
    const auto m = linear_model(MatrixXd::Zero(2, 2));
    Eigen::VectorXd x0(2);
    x0 << 0.3, -2.0;
    const auto traj = simulate(m, x0, times(3.0, 31));
    for (Eigen::Index i = 0; i < 31; ++i) EXPECT_EQ(traj.states.row(i), x0.transpose());
}

TEST(Simulate, ExponentialGrowth) {
    const auto m = linear_model(MatrixXd::Identity(1, 1));
    const auto traj = simulate(m, Eigen::VectorXd::Ones(1), times(1.0, 11));
    EXPECT_NEAR(traj.states(10, 0), std::exp(1.0), 1e-6);
    for (Eigen::Index i = 1; i < 11; ++i) {
        EXPECT_GT(traj.states(i, 0), traj.states(i - 1, 0));
        EXPECT_GT(traj.states(i, 0), 0.0);
    }
}

TEST(Simulate, BlowUpTruncates) {
    // dq/dt = q^2 from q = 1 escapes at t = 1
    FittedModel m;
    m.library = make_library(PolynomialLibrary{2, false, false});
    m.layout = {1, 0};
    m.coefficients.xi = MatrixXd(2, 1);
    m.coefficients.xi << 0, 1;
    m.coefficients.names = {"q0", "q0^2"};
    m.target_names = {"q0_t"};
    const auto traj = simulate(m, Eigen::VectorXd::Ones(1), times(2.0, 21));
    EXPECT_TRUE(traj.truncated);
    EXPECT_FALSE(traj.message.empty());
    EXPECT_LT(traj.times.size(), 21u);
    EXPECT_EQ(Eigen::Index(traj.times.size()), traj.states.rows());
}

TEST(Simulate, Preconditions) {
    const auto m = linear_model(MatrixXd::Identity(1, 1));
    EXPECT_THROW(simulate(m, Eigen::VectorXd::Ones(2), times(1.0, 3)), DataError);
    EXPECT_THROW(simulate(m, Eigen::VectorXd::Ones(1), {0.0, 1.0, 0.5}), DataError);
    FittedModel pde = m;
    pde.library = make_library(PDELibrary{1, {0}, nullptr});
    EXPECT_THROW(simulate(pde, Eigen::VectorXd::Ones(1), times(1.0, 3)), ConfigError);
}

namespace {

// logistic growth q_t = q - q^2
Dataset logistic(std::size_t n = 400, double noise = 0.0) {
    std::vector<double> t(n), s;
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = 0.005 * double(i);
        s.push_back(1.0 / (1.0 + 9.0 * std::exp(-t[i])));
    }
    Dataset d(Grid{Axis::make("t", t), {}}, 1, s);
    return noise > 0.0 ? add_noise(d, noise, 17) : d;
}

LibraryPtr implicit_library(LibraryPtr functions) {
    return make_library(ConcatLibrary{{functions, make_library(PDELibrary{1, {kTimeAxis}, nullptr})}});
}

}  // namespace

TEST(Implicit, RecoversExplicitRelation) {
    const auto lib = implicit_library(make_library(PolynomialLibrary{2, true, true}));
    const auto ranked = fit_implicit(logistic(), lib, DiffSettings{FiniteDifference{6}}, STLSQ{0.05, 0.0, 20},
                                     {"1", "q0_t"});
    ASSERT_EQ(ranked.size(), 2u);
    EXPECT_EQ(ranked[0].lhs, "q0_t");
    EXPECT_LE(ranked[0].residual, 1e-6);
    EXPECT_GT(ranked[1].residual, 10 * ranked[0].residual);
    EXPECT_FALSE(ranked[0].degenerate);
    const auto& c = ranked[0].model.coefficients;
    EXPECT_EQ(c.xi(0, 0), 0.0);
    EXPECT_NEAR(c.xi(1, 0), 1.0, 1e-5);
    EXPECT_NEAR(c.xi(2, 0), -1.0, 1e-5);
    EXPECT_EQ(c.xi(3, 0), 0.0);
}

TEST(Implicit, DuplicateColumnFlagged) {
    const auto lib = implicit_library(make_library(ConcatLibrary{
        {make_library(PolynomialLibrary{2, true, true}), make_library(CustomLibrary{{CustomFunction{"", "sq({})", [](double v) { return v * v; }}}})}}));
    const auto ranked = fit_implicit(logistic(), lib, DiffSettings{FiniteDifference{4}}, STLSQ{0.05, 0.0, 20}, {"q0^2"});
    ASSERT_EQ(ranked.size(), 1u);
    EXPECT_TRUE(ranked[0].degenerate);
    EXPECT_EQ(ranked[0].excluded, (std::vector<std::string>{"sq(q0)"}));
    const auto& names = ranked[0].model.coefficients.names;
    const auto dup = std::find(names.begin(), names.end(), "sq(q0)") - names.begin();
    EXPECT_EQ(ranked[0].model.coefficients.xi(dup, 0), 0.0);
}

TEST(Implicit, RankingInvariantToColumnScaling) {
    auto scaled = [](double c) {
        CustomFunction f{"", "c({})", [c](double v) { return c * std::sin(v); }};
        return implicit_library(make_library(
            ConcatLibrary{{make_library(PolynomialLibrary{2, true, true}), make_library(CustomLibrary{{f}})}}));
    };
    FitOptions opts;
    opts.normalize = true;
    const std::vector<std::string> candidates{"q0_t", "q0^2", "q0", "1"};
    const Dataset d = logistic(400, 0.001);
    const auto a = fit_implicit(d, scaled(1.0), DiffSettings{SavitzkyGolay{}}, STLSQ{0.05, 0.0, 20}, candidates, opts);
    const auto b = fit_implicit(d, scaled(250.0), DiffSettings{SavitzkyGolay{}}, STLSQ{0.05, 0.0, 20}, candidates, opts);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].lhs, b[i].lhs);
        EXPECT_NEAR(a[i].residual, b[i].residual, 1e-9);
    }
}

TEST(Implicit, UnknownCandidate) {
    EXPECT_THROW(fit_implicit(logistic(), implicit_library(kPoly1), DiffSettings{}, STLSQ{}, {"q9"}), ConfigError);
}

TEST(Equations, Format) {
    auto m = linear_model(MatrixXd::Zero(2, 2));
    EXPECT_EQ(equations(m, 3), (std::vector<std::string>{"q0_t = 0", "q1_t = 0"}));
    m.coefficients.xi(1, 0) = 0.987;
    m.coefficients.xi(0, 0) = -1.0;
    EXPECT_EQ(equations(m, 2)[0], "q0_t = -1.0 q0 + 0.99 q1");
    EXPECT_EQ(format_coefficient(-0.98123, 2), "-0.98");
    EXPECT_EQ(format_coefficient(27.996, 3), "28.0");
    EXPECT_EQ(format_coefficient(-2.6667, 3), "-2.67");
    EXPECT_EQ(format_coefficient(1234.5, 2), "1200.0");
    EXPECT_EQ(format_coefficient(0.000123456, 3), "0.000123");
}

TEST(Equations, RoundTrip) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ud(-50.0, 50.0);
    FittedModel m;
    m.library = make_library(PolynomialLibrary{2, true, true});
    m.layout = {2, 0};
    m.coefficients.names = feature_names(*m.library, m.layout);
    m.coefficients.xi = MatrixXd::Zero(6, 2);
    for (Eigen::Index k = 0; k < 6; k += 2) m.coefficients.xi(k, 0) = ud(rng);
    m.coefficients.xi(5, 1) = 1e-3 * ud(rng);
    m.target_names = {"q0_t", "q1_t"};
    for (int precision : {2, 4, 8}) {
        const auto eqs = equations(m, precision);
        for (std::size_t t = 0; t < 2; ++t) {
            const auto parsed = parse_equation(eqs[t]);
            EXPECT_EQ(parsed.target, m.target_names[t]);
            for (Eigen::Index k = 0; k < 6; ++k) {
                const double v = m.coefficients.xi(k, Eigen::Index(t));
                const auto it = parsed.terms.find(m.coefficients.names[std::size_t(k)]);
                if (v == 0.0) {
                    EXPECT_EQ(it, parsed.terms.end());
                } else {
                    ASSERT_NE(it, parsed.terms.end());
                    EXPECT_NEAR(it->second, v, std::abs(v) * std::pow(10.0, 1 - precision));
                }
            }
        }
    }
}
