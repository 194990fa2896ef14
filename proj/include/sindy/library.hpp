#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sindy/data.hpp"
#include "sindy/diff.hpp"
#include "sindy/execution.hpp"

namespace sindy {

struct LibrarySpec;
using LibraryPtr = std::shared_ptr<const LibrarySpec>;

// Feature names follow one grammar: inputs are q0..q{n-1} then u0..u{r-1},
// derivative suffixes are _x/_y/_z/_t repeated per order ("q0_xx"), powers are
// "q0^2", and products join factors with a single space ("q0 q1_x").

struct PolynomialLibrary {
    int degree = 2;
    bool include_bias = true;
    bool include_interactions = true;
};

/// sin(k v) and cos(k v) for k = 1..n_frequencies and every input v.
struct FourierLibrary {
    int n_frequencies = 1;
    bool include_sin = true;
    bool include_cos = true;
};

/// Unary function applied to every input; `name_format` contains "{}" where the
/// input name goes, e.g. "exp({})".
struct CustomFunction {
    std::string id;
    std::string name_format;
    std::function<double(double)> fn;
};

/// Looks up a named built-in: exp, sin, cos, tanh, abs, inv, square, cube, sqrt, log.
CustomFunction builtin_function(const std::string& id);

struct CustomLibrary {
    std::vector<CustomFunction> functions;
};

/// Derivative terms along `axes` (spatial indices or kTimeAxis) up to total
/// order `derivative_order`, optionally multiplied by the columns of
/// `multiply_by`. Columns: multiply_by terms, then pure derivatives of every
/// state, then products f * derivative for every non-constant f.
struct PDELibrary {
    int derivative_order = 1;
    std::vector<int> axes{0};
    LibraryPtr multiply_by;
};

/// Integral (weak) formulation over random space-time subdomains.
///
/// Each row is one subdomain. Columns are the integrals of phi * g for every g
/// in `functions`, and, for every spatial multi-index alpha with
/// 1 <= |alpha| <= derivative_order, the integrals of phi * d^alpha q_j and
/// phi * d^alpha g (non-linear g), computed with all derivatives moved onto the
/// test function phi = prod (1 - zeta^2)^test_order. Evaluation also yields the
/// weak time-derivative target -int phi_t q.
struct WeakPDELibrary {
    int derivative_order = 0;
    std::vector<int> axes;
    LibraryPtr functions;
    int n_subdomains = 100;
    int test_order = 4;
    int time_window = 21;               // grid points per subdomain along t
    std::vector<int> space_window;      // grid points per subdomain per spatial axis
    std::uint64_t seed = 0;
};

struct ConcatLibrary {
    std::vector<LibraryPtr> parts;
};

/// Column (i, j) = left_i * right_j, ordered with i outer.
struct TensorLibrary {
    LibraryPtr left;
    LibraryPtr right;
};

/// Evaluates `inner` on the selected inputs only (indices into q..., u...).
struct InputSubsetLibrary {
    LibraryPtr inner;
    std::vector<int> inputs;
};

struct LibrarySpec {
    std::variant<PolynomialLibrary, FourierLibrary, CustomLibrary, PDELibrary, WeakPDELibrary,
                 ConcatLibrary, TensorLibrary, InputSubsetLibrary>
        kind;
};

template <class T>
LibraryPtr make_library(T spec) {
    return std::make_shared<const LibrarySpec>(LibrarySpec{std::move(spec)});
}

struct InputLayout {
    std::size_t n_states = 1;
    std::size_t n_controls = 0;
    std::size_t size() const { return n_states + n_controls; }
};

struct FeatureMatrix {
    Eigen::MatrixXd values;                  // m x p
    std::vector<std::string> names;          // p
    std::optional<Eigen::MatrixXd> weak_lhs;  // weak libraries only: m x n
};

/// Symbolic column names, in evaluation order.
std::vector<std::string> feature_names(const LibrarySpec& spec, InputLayout layout);

/// Number of columns `evaluate` will produce.
std::size_t predict_width(const LibrarySpec& spec, InputLayout layout);
inline std::size_t predict_width(const LibrarySpec& spec, std::size_t n_inputs) {
    return predict_width(spec, InputLayout{n_inputs, 0});
}

/// Throws ConfigError on invalid parameters or nested weak libraries.
void validate(const LibrarySpec& spec, InputLayout layout);

bool is_weak(const LibrarySpec& spec);
bool has_derivative_terms(const LibrarySpec& spec);

/// Evaluates the library on every grid sample (flatten order), or on every
/// subdomain for a weak library. `diff` computes derivative features.
FeatureMatrix evaluate(const LibrarySpec& spec, const Dataset& dataset, const DiffMethod& diff,
                       Execution exec = Execution::parallel);

/// As above, with a separate method for derivatives along the time axis.
FeatureMatrix evaluate(const LibrarySpec& spec, const Dataset& dataset, const DiffMethod& space_diff,
                       const DiffMethod& time_diff, Execution exec = Execution::parallel);

/// One feature row for a single state (and control) sample; libraries with
/// derivative terms are rejected.
Eigen::VectorXd evaluate_pointwise(const LibrarySpec& spec, std::span<const double> state,
                                   std::span<const double> control = {});

/// Quadrature-weighted samples of the k-th derivative of the 1D test function
/// (1 - zeta^2)^p on `coords` (zeta spans [-1, 1] over the coordinates).
/// For k >= 1 the discrete integral is projected to zero so that derivatives
/// of constant fields vanish exactly.
std::vector<double> weak_test_weights(std::span<const double> coords, int p, int k);

}  // namespace sindy
