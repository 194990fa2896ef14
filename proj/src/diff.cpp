#include "sindy/diff.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "sindy/error.hpp"
#include "fftw_lock.hpp"

namespace sindy {

std::mutex& detail::fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

namespace {

using detail::fftw_planner_mutex;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

std::vector<double> parse_numbers(std::string_view text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string token(text.substr(pos, comma - pos));
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(token, &used);
        } catch (const std::exception&) {
            throw ConfigError("bad number '" + token + "' in differentiation method");
        }
        if (used != token.size()) throw ConfigError("bad number '" + token + "' in differentiation method");
        out.push_back(v);
        pos = comma + 1;
    }
    return out;
}

int as_int(double v) {
    if (v != std::floor(v)) throw ConfigError("expected an integer, got " + std::to_string(v));
    return int(v);
}

}  // namespace

void validate(const DiffMethod& method, int d, std::size_t length) {
    if (d < 1) throw ConfigError("derivative order must be >= 1");
    std::visit(overloaded{
                   [&](const FiniteDifference& fd) {
                       if (fd.order < 2 || fd.order % 2 != 0) {
                           throw ConfigError("finite-difference order must be even and >= 2");
                       }
                       if (std::size_t(fd.order + d) > length) {
                           throw ConfigError("finite-difference order " + std::to_string(fd.order) +
                                             " for derivative " + std::to_string(d) + " needs " +
                                             std::to_string(fd.order + d) + " samples, axis has " +
                                             std::to_string(length));
                       }
                   },
                   [&](const SavitzkyGolay& sg) {
                       if (sg.window < 5 || sg.window % 2 == 0) {
                           throw ConfigError("Savitzky-Golay window must be odd and >= 5");
                       }
                       if (sg.poly_order < 2 || sg.poly_order >= sg.window) {
                           throw ConfigError("Savitzky-Golay polynomial order must satisfy 2 <= order < window");
                       }
                       if (sg.poly_order < d) {
                           throw ConfigError("Savitzky-Golay polynomial order is below the derivative order");
                       }
                       if (std::size_t(sg.window) > length) {
                           throw ConfigError("Savitzky-Golay window exceeds the axis length");
                       }
                   },
                   [&](const Spectral& sp) {
                       if (!(sp.filter_strength >= 0.0)) {
                           throw ConfigError("spectral filter strength must be >= 0");
                       }
                   },
               },
               method);
}

DiffMethod parse_diff_method(std::string_view text) {
    const auto colon = text.find(':');
    const std::string_view kind = text.substr(0, colon);
    const std::string_view args = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
    if (kind == "fd") {
        if (args.empty()) return FiniteDifference{};
        const auto v = parse_numbers(args);
        if (v.size() != 1) throw ConfigError("fd takes one argument: fd:<order>");
        return FiniteDifference{as_int(v[0])};
    }
    if (kind == "sg") {
        if (args.empty()) return SavitzkyGolay{};
        const auto v = parse_numbers(args);
        if (v.size() != 2) throw ConfigError("sg takes two arguments: sg:<window>,<poly>");
        return SavitzkyGolay{as_int(v[0]), as_int(v[1])};
    }
    if (kind == "spectral") {
        if (args.empty()) return Spectral{};
        const auto v = parse_numbers(args);
        if (v.size() != 1) throw ConfigError("spectral takes one argument: spectral:<filter>");
        return Spectral{v[0]};
    }
    throw ConfigError("unknown differentiation method '" + std::string(text) + "'");
}

std::string to_string(const DiffMethod& method) {
    return std::visit(overloaded{
                          [](const FiniteDifference& fd) { return "fd:" + std::to_string(fd.order); },
                          [](const SavitzkyGolay& sg) {
                              return "sg:" + std::to_string(sg.window) + "," + std::to_string(sg.poly_order);
                          },
                          [](const Spectral& sp) {
                              if (sp.filter_strength == 0.0) return std::string("spectral");
                              char buf[64];
                              auto res = std::to_chars(buf, buf + sizeof buf, sp.filter_strength);
                              return "spectral:" + std::string(buf, res.ptr);
                          },
                      },
                      method);
}

// Fornberg's recursion for interpolating-polynomial derivative weights.
std::vector<double> stencil_weights(double x0, std::span<const double> nodes, int d) {
    const std::size_t n = nodes.size();
    if (n <= std::size_t(d)) throw ConfigError("stencil needs more than d nodes");
    const std::size_t m = std::size_t(d);
    std::vector<double> c(n * (m + 1), 0.0);
    auto at = [&](std::size_t i, std::size_t k) -> double& { return c[i * (m + 1) + k]; };
    double c1 = 1.0;
    double c4 = nodes[0] - x0;
    at(0, 0) = 1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const std::size_t mn = std::min(i, m);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = nodes[i] - x0;
        for (std::size_t j = 0; j < i; ++j) {
            const double c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if (j == i - 1) {
                for (std::size_t k = mn; k >= 1; --k) {
                    at(i, k) = c1 * (double(k) * at(i - 1, k - 1) - c5 * at(i - 1, k)) / c2;
                }
                at(i, 0) = -c1 * c5 * at(i - 1, 0) / c2;
            }
            for (std::size_t k = mn; k >= 1; --k) {
                at(j, k) = (c4 * at(j, k) - double(k) * at(j, k - 1)) / c3;
            }
            at(j, 0) = c4 * at(j, 0) / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = at(i, m);
    return w;
}

namespace {

std::vector<double> savgol_weights(std::span<const double> nodes, double x0, int poly, int d) {
    // Least-squares fit in the scaled coordinate s = (x - x0) / h, then the
    // d-th derivative at x0 is d! * a_d / h^d.
    const Eigen::Index w = Eigen::Index(nodes.size());
    const double h = (nodes.back() - nodes.front()) / double(w - 1);
    Eigen::MatrixXd V(w, poly + 1);
    for (Eigen::Index i = 0; i < w; ++i) {
        const double s = (nodes[std::size_t(i)] - x0) / h;
        double p = 1.0;
        for (int c = 0; c <= poly; ++c) {
            V(i, c) = p;
            p *= s;
        }
    }
    const Eigen::MatrixXd pinv = V.colPivHouseholderQr().solve(Eigen::MatrixXd::Identity(w, w));
    double scale = std::tgamma(double(d) + 1.0) / std::pow(h, d);
    std::vector<double> weights(static_cast<std::size_t>(w));
    for (Eigen::Index i = 0; i < w; ++i) weights[std::size_t(i)] = scale * pinv(d, i);
    return weights;
}

}  // namespace

struct LineDifferentiator::SpectralPlan {
    std::size_t n = 0;
    std::vector<std::complex<double>> multiplier;
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;

    ~SpectralPlan() {
        std::lock_guard lock(fftw_planner_mutex());
        if (forward) fftw_destroy_plan(forward);
        if (backward) fftw_destroy_plan(backward);
    }
};

LineDifferentiator::LineDifferentiator(const Axis& axis, const DiffMethod& method, int d)
    : length_(axis.size()) {
    validate(method, d, length_);
    const auto& x = axis.values;
    const std::size_t L = length_;
    if (const auto* fd = std::get_if<FiniteDifference>(&method)) {
        const std::size_t centered = std::size_t(2 * ((d + 1) / 2) - 1 + fd->order);
        const std::size_t sided = std::size_t(d + fd->order);
        const std::size_t half = centered / 2;
        stencils_.reserve(L);
        for (std::size_t i = 0; i < L; ++i) {
            std::size_t start, width;
            if (centered <= L && i >= half && i + half < L) {
                start = i - half;
                width = centered;
            } else {
                width = sided;
                start = i < width / 2 ? 0 : std::min(i - width / 2, L - width);
            }
            stencils_.push_back({start, stencil_weights(x[i], {x.data() + start, width}, d)});
        }
    } else if (const auto* sg = std::get_if<SavitzkyGolay>(&method)) {
        const std::size_t w = std::size_t(sg->window);
        stencils_.reserve(L);
        for (std::size_t i = 0; i < L; ++i) {
            const std::size_t start = i < w / 2 ? 0 : std::min(i - w / 2, L - w);
            stencils_.push_back({start, savgol_weights({x.data() + start, w}, x[i], sg->poly_order, d)});
        }
    } else {
        const auto& sp = std::get<Spectral>(method);
        if (!axis.uniform) {
            throw ConfigError("spectral differentiation requires a uniform axis ('" + axis.name + "')");
        }
        auto plan = std::make_unique<SpectralPlan>();
        plan->n = L;
        const double h = axis.spacing();
        const double period = double(L) * h;
        const double k_max = std::numbers::pi / h;
        plan->multiplier.resize(L / 2 + 1);
        for (std::size_t j = 0; j <= L / 2; ++j) {
            const double k = 2.0 * std::numbers::pi * double(j) / period;
            std::complex<double> ik(0.0, k);
            std::complex<double> factor = std::pow(ik, d);
            if (L % 2 == 0 && j == L / 2 && d % 2 == 1) factor = 0.0;
            if (sp.filter_strength > 0.0) factor *= std::exp(-sp.filter_strength * std::pow(k / k_max, 8));
            plan->multiplier[j] = factor / double(L);
        }
        std::vector<double> real(L);
        std::vector<std::complex<double>> spec(L / 2 + 1);
        std::lock_guard lock(fftw_planner_mutex());
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        plan->forward = fftw_plan_dft_r2c_1d(int(L), real.data(),
                                             reinterpret_cast<fftw_complex*>(spec.data()), flags);
        plan->backward = fftw_plan_dft_c2r_1d(int(L), reinterpret_cast<fftw_complex*>(spec.data()),
                                              real.data(), flags);
        spectral_ = std::move(plan);
    }
}

LineDifferentiator::~LineDifferentiator() = default;
LineDifferentiator::LineDifferentiator(LineDifferentiator&&) noexcept = default;
LineDifferentiator& LineDifferentiator::operator=(LineDifferentiator&&) noexcept = default;

void LineDifferentiator::apply(const double* in, std::ptrdiff_t in_stride, double* out,
                               std::ptrdiff_t out_stride) const {
    if (spectral_) {
        const std::size_t L = length_;
        std::vector<double> real(L);
        std::vector<std::complex<double>> spec(L / 2 + 1);
        for (std::size_t i = 0; i < L; ++i) real[i] = in[std::ptrdiff_t(i) * in_stride];
        auto* spec_ptr = reinterpret_cast<fftw_complex*>(spec.data());
        fftw_execute_dft_r2c(spectral_->forward, real.data(), spec_ptr);
        for (std::size_t j = 0; j < spec.size(); ++j) spec[j] *= spectral_->multiplier[j];
        fftw_execute_dft_c2r(spectral_->backward, spec_ptr, real.data());
        for (std::size_t i = 0; i < L; ++i) out[std::ptrdiff_t(i) * out_stride] = real[i];
        return;
    }
    for (std::size_t i = 0; i < length_; ++i) {
        const auto& s = stencils_[i];
        double acc = 0.0;
        const double* base = in + std::ptrdiff_t(s.start) * in_stride;
        for (std::size_t k = 0; k < s.weights.size(); ++k) acc += s.weights[k] * base[std::ptrdiff_t(k) * in_stride];
        out[std::ptrdiff_t(i) * out_stride] = acc;
    }
}

std::vector<double> differentiate(std::span<const double> values, std::span<const double> axis,
                                  const DiffMethod& method, int d) {
    if (values.size() != axis.size()) throw DataError("values and axis lengths differ");
    const Axis ax = Axis::make("axis", std::vector<double>(axis.begin(), axis.end()));
    LineDifferentiator op(ax, method, d);
    std::vector<double> out(values.size());
    op.apply(values.data(), 1, out.data(), 1);
    return out;
}

std::vector<double> differentiate_field(const Grid& grid, std::span<const double> field,
                                        std::size_t width, const DiffMethod& method, int axis,
                                        int d, Execution exec) {
    const Axis& ax = grid.axis(axis);
    if (field.size() != grid.sample_count() * width) throw DataError("field does not match grid");
    // Row-major dims (spatial..., time, width); the line along `axis` has stride
    // equal to the product of all later dims.
    std::vector<std::size_t> dims;
    for (const auto& a : grid.spatial) dims.push_back(a.size());
    dims.push_back(grid.time_points());
    dims.push_back(width);
    const std::size_t axis_pos = axis == kTimeAxis ? dims.size() - 2 : std::size_t(axis);
    std::size_t inner = 1;
    for (std::size_t k = axis_pos + 1; k < dims.size(); ++k) inner *= dims[k];
    const std::size_t len = dims[axis_pos];
    const std::size_t outer = field.size() / (inner * len);
    const std::size_t lines = outer * inner;

    LineDifferentiator op(ax, method, d);
    std::vector<double> out(field.size());
    auto run_line = [&](std::size_t line) {
        const std::size_t o = line / inner, i = line % inner;
        const std::size_t offset = o * len * inner + i;
        op.apply(field.data() + offset, std::ptrdiff_t(inner), out.data() + offset, std::ptrdiff_t(inner));
    };
    if (exec == Execution::parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t line = 0; line < std::ptrdiff_t(lines); ++line) run_line(std::size_t(line));
    } else {
        for (std::size_t line = 0; line < lines; ++line) run_line(line);
    }
    return out;
}

std::vector<double> differentiate_dataset(const Dataset& dataset, const DiffMethod& method,
                                          int axis, int d, Execution exec) {
    if (axis == kTimeAxis && d == 1 && dataset.derivatives()) return *dataset.derivatives();
    return differentiate_field(dataset.grid(), dataset.states(), dataset.n_states(), method, axis, d, exec);
}

}  // namespace sindy
