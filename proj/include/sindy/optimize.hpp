#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sindy/execution.hpp"

namespace sindy {

/// Sparse regression  argmin_Xi ||Y - Theta Xi||^2 + R(Xi).
struct Problem {
    Eigen::MatrixXd theta;    // m x p
    Eigen::MatrixXd targets;  // m x n
    std::optional<Eigen::VectorXd> weights;  // per-row, >= 0
    // Scale each column of theta to unit 2-norm before solving; thresholds then
    // act on the scaled coefficients, which are mapped back afterwards.
    bool normalize = false;
    std::vector<std::string> feature_names;
    std::vector<std::string> target_names;
};

/// Linear equality constraints C vec(Xi) = d, where vec stacks the columns of
/// Xi (target-major): entry (feature k, target t) has index t * p + k.
struct EqualityConstraints {
    Eigen::MatrixXd lhs;  // k x (p * n)
    Eigen::VectorXd rhs;  // k
};

struct STLSQ {
    double threshold = 0.1;
    double alpha = 0.05;
    int max_iter = 20;
};

enum class Regularizer { l0, l1 };

struct SR3 {
    double threshold = 0.1;
    double nu = 1.0;
    Regularizer regularizer = Regularizer::l0;
    int max_iter = 30;
    double tol = 1e-5;
    std::optional<EqualityConstraints> constraints;
};

enum class PathSelection { holdout, path };

/// Backward elimination. `max_terms` (0 = unlimited) caps the support that
/// `solve` may return; `path` selection returns the largest such model.
struct SSR {
    int max_terms = 0;
    PathSelection selection = PathSelection::holdout;
    std::uint64_t seed = 0;
};

/// Forward selection by error reduction ratio. `max_terms` 0 means p.
struct FROLS {
    int max_terms = 0;
    double err_tol = 1e-6;
};

using OptimizerSpec = std::variant<STLSQ, SR3, SSR, FROLS>;

struct Diagnostics {
    bool converged = true;
    int iterations = 0;
    bool rank_deficient = false;
    bool empty_support = false;
    std::vector<std::size_t> dropped_columns;
    std::vector<std::string> warnings;
    // STLSQ: per target, residual after the initial fit followed by
    // (after thresholding, after refit) pairs for every iteration.
    std::vector<std::vector<double>> residual_history;
};

struct Coefficients {
    Eigen::MatrixXd xi;  // p x n
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> support;
    std::vector<std::string> names;
    Eigen::VectorXd residuals;  // per target
    Diagnostics diagnostics;

    std::size_t nonzeros() const { return std::size_t(support.count()); }
};

struct PathEntry {
    Eigen::VectorXd xi;  // p
    std::size_t sparsity = 0;
    double residual = 0.0;
};
using Path = std::vector<PathEntry>;

void validate(const OptimizerSpec& spec);
void validate(const Problem& problem);

Coefficients solve(const Problem& problem, const OptimizerSpec& spec,
                   Execution exec = Execution::parallel);

/// Greedy path for every target column: SSR from p terms down to 1, FROLS from
/// 1 term up to its stopping point.
std::vector<Path> solve_path(const Problem& problem, const OptimizerSpec& spec,
                             Execution exec = Execution::parallel);

/// Proximal operators of the SR3 sparsity step.
double hard_threshold(double x, double level);
double soft_threshold(double x, double level);

/// Parses `stlsq[:λ,α]`, `sr3[:λ,ν,l0|l1]`, `ssr[:max_terms]`, `frols[:max_terms]`.
OptimizerSpec parse_optimizer(const std::string& text);
std::string name_of(const OptimizerSpec& spec);

}  // namespace sindy
