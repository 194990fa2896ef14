#include "sindy/systems.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <random>

#include <boost/numeric/odeint.hpp>
#include <fftw3.h>

#include "fftw_lock.hpp"
#include "sindy/error.hpp"
#include "sindy/random.hpp"

namespace sindy {

namespace {

using cd = std::complex<double>;
using TermMap = std::map<std::string, double>;

Coefficients truth_from(const std::vector<std::string>& names, const std::vector<TermMap>& rows) {
    Coefficients c;
    c.names = names;
    c.xi = Eigen::MatrixXd::Zero(Eigen::Index(names.size()), Eigen::Index(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t) {
        for (const auto& [name, value] : rows[t]) {
            const auto it = std::find(names.begin(), names.end(), name);
            if (it == names.end()) throw ConfigError("truth term '" + name + "' missing from the library");
            c.xi(Eigen::Index(it - names.begin()), Eigen::Index(t)) = value;
        }
    }
    c.support = c.xi.array() != 0.0;
    c.residuals = Eigen::VectorXd::Zero(Eigen::Index(rows.size()));
    return c;
}

std::size_t steps_for(double span, double dt, const char* what) {
    const double ratio = span / dt;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
        throw ConfigError(std::string(what) + " must be a multiple of the step");
    }
    return std::size_t(rounded);
}

Benchmark lorenz(const LorenzSpec& s, const BenchmarkSpec& spec) {
    namespace odeint = boost::numeric::odeint;
    using State = std::array<double, 3>;
    const std::size_t count = steps_for(s.t_end - s.t_start, s.dt, "lorenz.t_end - t_start") + 1;
    std::vector<double> times(count);
    for (std::size_t i = 0; i < count; ++i) times[i] = s.t_start + double(i) * s.dt;

    auto rhs = [&](const State& q, State& dq, double) {
        dq[0] = s.sigma * (q[1] - q[0]);
        dq[1] = q[0] * (s.rho - q[2]) - q[1];
        dq[2] = q[0] * q[1] - s.beta * q[2];
    };
    std::vector<double> states;
    states.reserve(count * 3);
    auto observer = [&](const State& q, double) { states.insert(states.end(), q.begin(), q.end()); };
    State q = s.initial;
    auto stepper = odeint::make_dense_output(1e-12, 1e-10, odeint::runge_kutta_dopri5<State>());
    odeint::integrate_times(stepper, rhs, q, times.begin(), times.end(), s.dt, observer);
    for (double v : states) {
        if (!std::isfinite(v)) throw DataError("Lorenz integration diverged; reduce dt");
    }

    Grid grid{Axis::make("t", times), {}};
    Benchmark out;
    out.data = Dataset(std::move(grid), 3, std::move(states));
    out.library = canonical_library(spec);
    out.truth = truth_from(feature_names(*out.library, {3, 0}),
                           {{{"q0", -s.sigma}, {"q1", s.sigma}},
                            {{"q0", s.rho}, {"q1", -1.0}, {"q0 q2", -1.0}},
                            {{"q0 q1", 1.0}, {"q2", -s.beta}}});
    return out;
}

// Fourth-order exponential time differencing RK with contour-integral
// coefficients, on the full complex spectrum.
class KSStepper {
public:
    KSStepper(const KSSpec& s) : n_(std::size_t(s.n_grid)), h_(s.dt) {
        const double dk = 2.0 * std::numbers::pi / s.length;
        k_.resize(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            const long idx = j <= n_ / 2 ? long(j) : long(j) - long(n_);
            k_[j] = j == n_ / 2 ? 0.0 : dk * double(idx);
            keep_.push_back(std::abs(idx) < long(n_) / 3 ? 1.0 : 0.0);
        }
        const int m = 32;
        e_.resize(n_); e2_.resize(n_); q_.resize(n_); f1_.resize(n_); f2_.resize(n_); f3_.resize(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            const double lin = k_[j] * k_[j] - std::pow(k_[j], 4);
            const double hl = h_ * lin;
            e_[j] = std::exp(hl);
            e2_[j] = std::exp(hl / 2.0);
            cd q = 0.0, f1 = 0.0, f2 = 0.0, f3 = 0.0;
            for (int r = 1; r <= m; ++r) {
                const cd lr = hl + std::exp(cd(0.0, std::numbers::pi * (r - 0.5) / m));
                const cd el = std::exp(lr), lr3 = lr * lr * lr;
                q += (std::exp(lr / 2.0) - 1.0) / lr;
                f1 += (-4.0 - lr + el * (4.0 - 3.0 * lr + lr * lr)) / lr3;
                f2 += (2.0 + lr + el * (-2.0 + lr)) / lr3;
                f3 += (-4.0 - 3.0 * lr - lr * lr + el * (4.0 - lr)) / lr3;
            }
            q_[j] = h_ * (q / double(m)).real();
            f1_[j] = h_ * (f1 / double(m)).real();
            f2_[j] = h_ * (f2 / double(m)).real();
            f3_[j] = h_ * (f3 / double(m)).real();
        }
        buf_.resize(n_);
        std::lock_guard lock(detail::fftw_planner_mutex());
        auto* p = reinterpret_cast<fftw_complex*>(buf_.data());
        forward_ = fftw_plan_dft_1d(int(n_), p, p, FFTW_FORWARD, FFTW_ESTIMATE);
        backward_ = fftw_plan_dft_1d(int(n_), p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~KSStepper() {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
    }
    KSStepper(const KSStepper&) = delete;
    KSStepper& operator=(const KSStepper&) = delete;

    std::vector<cd> to_spectral(const std::vector<double>& u) {
        for (std::size_t j = 0; j < n_; ++j) buf_[j] = u[j];
        fftw_execute(forward_);
        return buf_;
    }

    // Physical values; records the largest imaginary residue.
    std::vector<double> to_physical(const std::vector<cd>& v) {
        buf_ = v;
        fftw_execute(backward_);
        std::vector<double> u(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            u[j] = buf_[j].real() / double(n_);
            max_imag_ = std::max(max_imag_, std::abs(buf_[j].imag()) / double(n_));
        }
        return u;
    }

    void step(std::vector<cd>& v) {
        const auto nv = nonlinear(v);
        std::vector<cd> a(n_), b(n_), c(n_);
        for (std::size_t j = 0; j < n_; ++j) a[j] = e2_[j] * v[j] + q_[j] * nv[j];
        const auto na = nonlinear(a);
        for (std::size_t j = 0; j < n_; ++j) b[j] = e2_[j] * v[j] + q_[j] * na[j];
        const auto nb = nonlinear(b);
        for (std::size_t j = 0; j < n_; ++j) c[j] = e2_[j] * a[j] + q_[j] * (2.0 * nb[j] - nv[j]);
        const auto nc = nonlinear(c);
        for (std::size_t j = 0; j < n_; ++j) {
            v[j] = e_[j] * v[j] + nv[j] * f1_[j] + 2.0 * (na[j] + nb[j]) * f2_[j] + nc[j] * f3_[j];
        }
        // Keep the spectrum conjugate-symmetric.
        v[0] = v[0].real();
        v[n_ / 2] = v[n_ / 2].real();
        for (std::size_t j = 1; j < n_ / 2; ++j) {
            const cd sym = 0.5 * (v[j] + std::conj(v[n_ - j]));
            v[j] = sym;
            v[n_ - j] = std::conj(sym);
        }
    }

    double max_imaginary() const { return max_imag_; }
    double max_abs() const { return max_abs_; }

private:
    // -0.5 (u^2)_x with 2/3-rule dealiasing.
    std::vector<cd> nonlinear(const std::vector<cd>& v) {
        buf_ = v;
        fftw_execute(backward_);
        for (auto& z : buf_) {
            const double u = z.real() / double(n_);
            max_abs_ = std::max(max_abs_, std::isfinite(u) ? std::abs(u) : INFINITY);
            z = u * u;
        }
        fftw_execute(forward_);
        std::vector<cd> out(n_);
        for (std::size_t j = 0; j < n_; ++j) out[j] = cd(0.0, -0.5 * k_[j]) * buf_[j] * keep_[j];
        return out;
    }

    std::size_t n_;
    double h_;
    std::vector<double> k_, keep_, e_, e2_, q_, f1_, f2_, f3_;
    std::vector<cd> buf_;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
    double max_imag_ = 0.0;
    double max_abs_ = 0.0;
};

constexpr double kKSBlowUp = 1e3;

Benchmark kuramoto_sivashinsky(const KSSpec& s, const BenchmarkSpec& spec) {
    const std::size_t per_save = steps_for(s.dt_save, s.dt, "ks.dt_save");
    const std::size_t burn = steps_for(s.burn_in, s.dt, "ks.burn_in");
    const auto n = std::size_t(s.n_grid);
    const std::size_t saves = std::size_t(s.n_saves);

    std::mt19937_64 rng(derive_seed(spec.seed, 0));
    std::uniform_int_distribution<int> wave(1, s.max_wavenumber);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::vector<double> u(n, 0.0);
    for (int mode = 0; mode < s.n_modes; ++mode) {
        const int kw = wave(rng);
        const double ph = phase(rng);
        for (std::size_t j = 0; j < n; ++j) {
            const double x = s.length * double(j) / double(n);
            u[j] += std::cos(2.0 * std::numbers::pi * kw * x / s.length + ph);
        }
    }

    KSStepper stepper(s);
    auto v = stepper.to_spectral(u);
    auto check = [&](double t) {
        if (!(stepper.max_abs() < kKSBlowUp)) {
            throw DataError("KS integration unstable near t=" + std::to_string(t) + "; try dt <= " +
                            std::to_string(s.dt / 2));
        }
    };
    for (std::size_t i = 0; i < burn; ++i) {
        stepper.step(v);
        if (i % 100 == 0) check(double(i) * s.dt);
    }
    check(s.burn_in);

    std::vector<double> states(n * saves);
    for (std::size_t t = 0; t < saves; ++t) {
        if (t > 0) {
            for (std::size_t i = 0; i < per_save; ++i) stepper.step(v);
            check(s.burn_in + double(t) * s.dt_save);
        }
        const auto field = stepper.to_physical(v);
        for (std::size_t j = 0; j < n; ++j) states[j * saves + t] = field[j];
    }

    Grid grid{Axis::linspace("t", 0.0, s.dt_save, saves), {Axis::linspace("x", 0.0, s.length / double(n), n, true)}};
    Benchmark out;
    out.data = Dataset(std::move(grid), 1, std::move(states));
    out.library = canonical_library(spec);
    out.truth = truth_from(feature_names(*out.library, {1, 0}), {{{"q0 q0_x", -1.0}, {"q0_xx", -1.0}, {"q0_xxxx", -1.0}}});
    out.max_imaginary = stepper.max_imaginary();
    return out;
}

}  // namespace

void validate(const BenchmarkSpec& spec) {
    if (!(spec.noise >= 0.0)) throw ConfigError("noise must be >= 0");
    if (const auto* l = std::get_if<LorenzSpec>(&spec.system)) {
        if (!(l->dt > 0.0)) throw ConfigError("lorenz.dt must be positive");
        if (!(l->t_end > l->t_start)) throw ConfigError("lorenz.t_end must exceed t_start");
        steps_for(l->t_end - l->t_start, l->dt, "lorenz.t_end - t_start");
    } else {
        const auto& k = std::get<KSSpec>(spec.system);
        if (k.n_grid < 8 || (k.n_grid & (k.n_grid - 1)) != 0) throw ConfigError("ks.n_grid must be a power of two >= 8");
        if (!(k.length > 0.0)) throw ConfigError("ks.length must be positive");
        if (!(k.dt > 0.0)) throw ConfigError("ks.dt must be positive");
        if (!(k.dt_save >= k.dt)) throw ConfigError("ks.dt_save must be >= ks.dt");
        if (k.n_saves < 2) throw ConfigError("ks.n_saves must be >= 2");
        if (!(k.burn_in >= 0.0)) throw ConfigError("ks.burn_in must be >= 0");
        if (k.n_modes < 1) throw ConfigError("ks.n_modes must be >= 1");
        if (k.max_wavenumber < 1 || k.max_wavenumber >= k.n_grid / 3) throw ConfigError("ks.max_wavenumber out of range");
        steps_for(k.dt_save, k.dt, "ks.dt_save");
        steps_for(k.burn_in, k.dt, "ks.burn_in");
    }
}

LibraryPtr canonical_library(const BenchmarkSpec& spec) {
    if (std::holds_alternative<LorenzSpec>(spec.system)) return make_library(PolynomialLibrary{2, true, true});
    return make_library(PDELibrary{4, {0}, make_library(PolynomialLibrary{2, true, true})});
}

Benchmark generate(const BenchmarkSpec& spec) {
    validate(spec);
    Benchmark out = std::visit(
        [&](const auto& s) {
            if constexpr (std::is_same_v<std::decay_t<decltype(s)>, LorenzSpec>) return lorenz(s, spec);
            else return kuramoto_sivashinsky(s, spec);
        },
        spec.system);
    if (spec.noise > 0.0) out.data = add_noise(out.data, spec.noise, derive_seed(spec.seed, 1));
    return out;
}

double verify_residual(const Dataset& data, const Coefficients& truth, const LibrarySpec& library,
                       const DiffSettings& diff) {
    const FeatureMatrix fm = evaluate(library, data, diff.spatial(), diff.time);
    if (fm.values.cols() != truth.xi.rows()) throw ConfigError("truth does not match the library width");
    if (truth.xi.isZero(0.0)) return 1.0;
    const auto qt = differentiate_dataset(data, diff.time, kTimeAxis, 1);
    const Eigen::Map<const RowMatrix> target(qt.data(), fm.values.rows(), Eigen::Index(data.n_states()));
    const double denom = target.norm();
    const double num = (target - fm.values * truth.xi).norm();
    return denom > 0.0 ? num / denom : num;
}

}  // namespace sindy
