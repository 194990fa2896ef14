// One PASS/FAIL line per acceptance criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "sindy/cli.hpp"
#include "sindy/model.hpp"
#include "sindy/systems.hpp"

using namespace sindy;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& title, bool ok, const std::string& detail) {
    std::printf("%s %d %s: %s\n", ok ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
    std::fflush(stdout);
    failures += !ok;
}

template <class... Args>
std::string fmt(const char* f, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::ptrdiff_t index_of(const std::vector<std::string>& names, const std::string& name) {
    return std::find(names.begin(), names.end(), name) - names.begin();
}

MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    return MatrixXd::NullaryExpr(rows, cols, [&] { return nd(rng); });
}

void ks_criteria() {
    const auto t0 = std::chrono::steady_clock::now();
    const Benchmark b = generate(BenchmarkSpec{KSSpec{}, 0.0, 0});
    const auto [train, test] = split_train_test(b.data, 0.6);
    const auto model = fit(train, b.library, DiffSettings{SavitzkyGolay{}, Spectral{}}, STLSQ{});
    const double elapsed = seconds_since(t0);

    const auto& c = model.coefficients;
    bool support_ok = c.support.count() == 3;
    std::string coefs;
    double worst = 0.0;
    for (const char* name : {"q0 q0_x", "q0_xx", "q0_xxxx"}) {
        const auto k = index_of(c.names, name);
        if (std::size_t(k) == c.names.size() || !c.support(k, 0)) {
            support_ok = false;
            continue;
        }
        worst = std::max(worst, std::abs(c.xi(k, 0) + 1.0));
        coefs += fmt(" %s=%.4f", name, c.xi(k, 0));
    }
    const bool ok = support_ok && worst <= 0.05 && elapsed <= 120.0;
    report(1, "KS recovery", ok,
           fmt("shape %zux%zu, %ld terms,%s, max |c+1| %.4f (<= 0.05), %.1f s (<= 120)",
               b.data.grid().spatial[0].size(), b.data.grid().time_points(), long(c.support.count()), coefs.c_str(),
               worst, elapsed));

    const double r2 = score(model, test);
    report(2, "KS test-set prediction", r2 >= 0.99, fmt("R^2 on held-out 40%% = %.5f (>= 0.99)", r2));
}

void lorenz_criterion() {
    const Benchmark b = generate(BenchmarkSpec{LorenzSpec{}, 0.0, 0});
    const auto t0 = std::chrono::steady_clock::now();
    const auto model = fit(b.data, b.library, DiffSettings{}, STLSQ{});
    const double elapsed = seconds_since(t0);
    const bool same_support = (model.coefficients.support.array() == (b.truth.xi.array() != 0.0)).all();
    double worst = 0.0;
    for (Eigen::Index k = 0; k < b.truth.xi.rows(); ++k)
        for (Eigen::Index t = 0; t < b.truth.xi.cols(); ++t)
            if (b.truth.xi(k, t) != 0.0)
                worst = std::max(worst, std::abs(model.coefficients.xi(k, t) / b.truth.xi(k, t) - 1.0));
    report(3, "Lorenz recovery", same_support && worst <= 1e-2 && elapsed <= 10.0,
           fmt("%ld terms (7 expected), support %s, max relative error %.2e (<= 1e-2), fit %.2f s (<= 10)",
               long(model.coefficients.support.count()), same_support ? "exact" : "wrong", worst, elapsed));
}

void optimizer_oracles() {
    double ls_gap = 0.0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        Problem p;
        p.theta = gaussian(60, 8, s);
        p.targets = gaussian(60, 2, s + 5000);
        const auto c = solve(p, STLSQ{0.0, 0.0, 20});
        const MatrixXd direct = p.theta.householderQr().solve(p.targets);
        ls_gap = std::max(ls_gap, (c.xi - direct).cwiseAbs().maxCoeff());
    }
    double prox_gap = 0.0;
    std::mt19937_64 rng(77);
    std::normal_distribution<double> nd(0.0, 2.0);
    for (double nu : {0.25, 1.0, 3.0}) {
        Problem p;
        p.theta = MatrixXd::Identity(16, 16);
        p.targets = VectorXd::NullaryExpr(16, [&] { return nd(rng); });
        SR3 spec;
        spec.threshold = 0.4;
        spec.nu = nu;
        spec.regularizer = Regularizer::l1;
        spec.max_iter = 10000;
        spec.tol = 1e-15;
        const auto c = solve(p, spec);
        for (Eigen::Index k = 0; k < 16; ++k)
            prox_gap = std::max(prox_gap, std::abs(c.xi(k, 0) - soft_threshold(p.targets(k, 0), spec.threshold * (1.0 + nu))));
    }
    report(4, "Optimizer oracle equivalence", ls_gap <= 1e-10 && prox_gap <= 1e-10,
           fmt("STLSQ(0,0) vs QR least squares max gap %.1e over 50 problems; SR3 l1 vs soft threshold max gap %.1e (<= 1e-10)",
               ls_gap, prox_gap));
}

void greedy_criterion() {
    int ssr_hits = 0, frols_hits = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        Problem p;
        p.theta = gaussian(200, 10, s);
        VectorXd xi = VectorXd::Zero(10);
        xi(1) = 2.0;
        xi(3) = -1.5;
        p.targets = p.theta * xi + 0.01 * gaussian(200, 1, s + 1000);
        auto planted = [](const Coefficients& c) {
            return c.support.count() == 2 && c.support(1, 0) && c.support(3, 0);
        };
        ssr_hits += planted(solve(p, SSR{0, PathSelection::holdout, s}));
        frols_hits += planted(solve(p, FROLS{}));
    }
    report(5, "Greedy support recovery", ssr_hits >= 95 && frols_hits >= 95,
           fmt("SSR %d/100, FROLS %d/100 at noise 0.01 (>= 95 each)", ssr_hits, frols_hits));
}

void ensemble_criterion() {
    const Benchmark b = generate(BenchmarkSpec{LorenzSpec{}, 0.01, 0});
    const auto model = fit(b.data, b.library, DiffSettings{SavitzkyGolay{51, 3}}, STLSQ{0.5}, EnsembleSpec{});
    const auto& prob = model.ensemble->inclusion_probability;
    double min_true = 1.0, max_spurious = 0.0, worst = 0.0;
    for (Eigen::Index k = 0; k < prob.rows(); ++k) {
        for (Eigen::Index t = 0; t < prob.cols(); ++t) {
            const double truth = b.truth.xi(k, t);
            if (truth != 0.0) {
                min_true = std::min(min_true, prob(k, t));
                worst = std::max(worst, std::abs(model.coefficients.xi(k, t) / truth - 1.0));
            } else {
                max_spurious = std::max(max_spurious, prob(k, t));
            }
        }
    }
    report(6, "Ensembling robustness", min_true >= 0.9 && max_spurious <= 0.3 && worst <= 0.1,
           fmt("1%% noise, 20 members: true-term inclusion >= %.2f (>= 0.9), spurious <= %.2f (<= 0.3), "
               "median coefficients within %.1f%% (<= 10%%)",
               min_true, max_spurious, 100.0 * worst));
}

void weak_criterion() {
    int wins = 0;
    std::string detail;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Benchmark b = generate(BenchmarkSpec{LorenzSpec{}, 0.10, s});
        WeakPDELibrary w;
        w.functions = b.library;
        w.n_subdomains = 200;
        w.time_window = 101;
        w.seed = s;
        const OptimizerSpec opt = STLSQ{0.5};
        const auto weak = fit(b.data, make_library(w), DiffSettings{}, opt);
        const auto strong = fit(b.data, b.library, DiffSettings{SavitzkyGolay{51, 3}}, opt);
        const double ew = (weak.coefficients.xi - b.truth.xi).norm() / b.truth.xi.norm();
        const double es = (strong.coefficients.xi - b.truth.xi).norm() / b.truth.xi.norm();
        wins += ew < es;
        detail += fmt(" %.3f/%.3f", ew, es);
    }
    report(7, "Weak-form advantage", wins >= 8,
           fmt("weak beats differential on %d/10 seeds (>= 8); errors weak/diff:%s", wins, detail.c_str()));
}

void diff_criterion() {
    double exact_gap = 0.0;
    for (int order : {2, 4, 6}) {
        std::vector<double> t(25);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.3 * double(i) + 0.01 * double(i * i);
        for (int deg = 0; deg <= order; ++deg) {
            std::vector<double> f(t.size()), df(t.size());
            for (std::size_t i = 0; i < t.size(); ++i) {
                f[i] = std::pow(t[i], deg);
                df[i] = deg == 0 ? 0.0 : deg * std::pow(t[i], deg - 1);
            }
            const auto d = differentiate(f, t, FiniteDifference{order});
            double scale = 1.0;
            for (double v : df) scale = std::max(scale, std::abs(v));
            for (std::size_t i = 0; i < t.size(); ++i) exact_gap = std::max(exact_gap, std::abs(d[i] - df[i]) / scale);
        }
    }

    std::vector<double> x(64), s(64);
    for (std::size_t i = 0; i < 64; ++i) {
        x[i] = 2.0 * std::numbers::pi * double(i) / 64.0;
        s[i] = std::sin(x[i]);
    }
    const auto ds = differentiate(s, x, Spectral{});
    double spectral_err = 0.0;
    for (std::size_t i = 0; i < 64; ++i) spectral_err = std::max(spectral_err, std::abs(ds[i] - std::cos(x[i])));

    std::vector<double> t(1000), f(1000), exact(1000);
    std::mt19937_64 rng(0);
    std::normal_distribution<double> nd(0.0, 0.01);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = 10.0 * double(i) / 999.0;
        f[i] = std::sin(t[i]) + nd(rng);
        exact[i] = std::cos(t[i]);
    }
    auto max_err = [&](const std::vector<double>& d) {
        double e = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) e = std::max(e, std::abs(d[i] - exact[i]));
        return e;
    };
    const double factor = max_err(differentiate(f, t, FiniteDifference{2})) / max_err(differentiate(f, t, SavitzkyGolay{11, 3}));

    report(8, "Differentiation suite", exact_gap <= 1e-9 && spectral_err <= 1e-10 && factor >= 3.0,
           fmt("FD order 2/4/6 polynomial gap %.1e (<= 1e-9), spectral sin->cos %.1e (<= 1e-10), "
               "SG noise suppression %.2fx (>= 3)",
               exact_gap, spectral_err, factor));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void determinism_criterion() {
    const fs::path dir = fs::temp_directory_path() / "sindy_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::vector<std::string> configs{
        R"({"schema": 1, "seed": 5, "data": {"benchmark": {"system": "lorenz", "noise": 0.01}},
            "diff": "sg:51,3", "optimizer": "stlsq:0.5", "ensemble": {"n_models": 20, "n_library_drop": 1}})",
        R"({"schema": 1, "seed": 2, "data": {"benchmark": {"system": "lorenz", "noise": 0.1}},
            "library": {"type": "weak_pde", "n_subdomains": 200, "time_window": 101,
                        "functions": {"type": "polynomial", "degree": 2}},
            "optimizer": "stlsq:0.5"})",
        R"({"schema": 1, "data": {"benchmark": {"system": "ks", "n_saves": 60}},
            "diff": "sg", "spatial_diff": "spectral", "optimizer": "ssr"})"};
    int identical = 0;
    std::ostringstream sink;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const fs::path cfg = dir / ("config" + std::to_string(i) + ".json");
        std::ofstream(cfg) << configs[i];
        const int a = cli::cmd_fit(cfg, dir / ("a" + std::to_string(i)), std::nullopt, {}, {}, {}, false, sink, sink);
        const int b = cli::cmd_fit(cfg, dir / ("b" + std::to_string(i)), std::nullopt, {}, {}, {}, false, sink, sink);
        const std::string ra = slurp(dir / ("a" + std::to_string(i)) / "report.json");
        identical += a == 0 && b == 0 && !ra.empty() && ra == slurp(dir / ("b" + std::to_string(i)) / "report.json");
    }
    fs::remove_all(dir);
    report(9, "Determinism", identical == int(configs.size()),
           fmt("%d/%zu configs produced byte-identical report.json on repeated fits", identical, configs.size()));
}

void guarded(int id, const char* title, const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        report(id, title, false, std::string("exception: ") + e.what());
    }
}

}  // namespace

int main() {
    guarded(1, "KS recovery", ks_criteria);
    guarded(3, "Lorenz recovery", lorenz_criterion);
    guarded(4, "Optimizer oracle equivalence", optimizer_oracles);
    guarded(5, "Greedy support recovery", greedy_criterion);
    guarded(6, "Ensembling robustness", ensemble_criterion);
    guarded(7, "Weak-form advantage", weak_criterion);
    guarded(8, "Differentiation suite", diff_criterion);
    guarded(9, "Determinism", determinism_criterion);
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
