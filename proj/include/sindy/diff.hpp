#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sindy/data.hpp"
#include "sindy/execution.hpp"

namespace sindy {

/// Centered stencil of accuracy `order` in the interior, one-sided stencils of
/// the same order near the boundaries. Works on nonuniform nodes.
struct FiniteDifference {
    int order = 2;
};

/// Local least-squares polynomial fit over `window` points; boundary points
/// use the nearest full window.
struct SavitzkyGolay {
    int window = 11;
    int poly_order = 3;
};

/// Fourier differentiation on a uniform, periodic axis with an optional
/// exp(-strength * (k / k_max)^8) low-pass filter.
struct Spectral {
    double filter_strength = 0.0;
};

using DiffMethod = std::variant<FiniteDifference, SavitzkyGolay, Spectral>;

/// Throws ConfigError when `method` cannot produce a d-th derivative on
/// `length` samples.
void validate(const DiffMethod& method, int d, std::size_t length);

/// Parses `fd:<order>`, `sg:<window>,<poly>` or `spectral[:<filter>]`.
DiffMethod parse_diff_method(std::string_view text);
std::string to_string(const DiffMethod& method);

/// Weights w such that sum_i w_i f(nodes_i) approximates f^(d)(x0), exact for
/// polynomials of degree < nodes.size().
std::vector<double> stencil_weights(double x0, std::span<const double> nodes, int d);

/// Differentiation operator for one axis, built once and applied to many lines.
class LineDifferentiator {
public:
    LineDifferentiator(const Axis& axis, const DiffMethod& method, int d);
    ~LineDifferentiator();
    LineDifferentiator(LineDifferentiator&&) noexcept;
    LineDifferentiator& operator=(LineDifferentiator&&) noexcept;

    std::size_t size() const { return length_; }

    /// out[i * out_stride] = d-th derivative at node i of in[j * in_stride].
    void apply(const double* in, std::ptrdiff_t in_stride, double* out,
               std::ptrdiff_t out_stride) const;

private:
    struct Stencil {
        std::size_t start;
        std::vector<double> weights;
    };
    struct SpectralPlan;

    std::size_t length_ = 0;
    std::vector<Stencil> stencils_;
    std::unique_ptr<SpectralPlan> spectral_;
};

/// d-th derivative of `values` sampled at `axis`.
std::vector<double> differentiate(std::span<const double> values, std::span<const double> axis,
                                  const DiffMethod& method, int d = 1);

/// Differentiates every state variable along one axis (kTimeAxis or a spatial
/// index). When the dataset carries precomputed derivatives and the request is
/// a first time derivative, those are returned unchanged.
std::vector<double> differentiate_dataset(const Dataset& dataset, const DiffMethod& method,
                                          int axis, int d = 1,
                                          Execution exec = Execution::parallel);

/// Same traversal applied to an arbitrary field with `width` values per sample.
std::vector<double> differentiate_field(const Grid& grid, std::span<const double> field,
                                        std::size_t width, const DiffMethod& method, int axis,
                                        int d = 1, Execution exec = Execution::parallel);

}  // namespace sindy
