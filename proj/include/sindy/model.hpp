#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sindy/data.hpp"
#include "sindy/diff.hpp"
#include "sindy/ensemble.hpp"
#include "sindy/library.hpp"
#include "sindy/optimize.hpp"

namespace sindy {

/// Time derivatives (targets) and spatial derivatives (library features) may
/// use different methods; `space` defaults to `time`.
struct DiffSettings {
    DiffMethod time = FiniteDifference{2};
    std::optional<DiffMethod> space;

    const DiffMethod& spatial() const { return space ? *space : time; }
};

struct FitOptions {
    bool normalize = false;
    Execution exec = Execution::parallel;
};

struct FittedModel {
    Coefficients coefficients;  // library width x targets
    LibraryPtr library;
    DiffSettings diff;
    OptimizerSpec optimizer;
    InputLayout layout;
    std::vector<std::string> target_names;
    std::optional<EnsembleReport> ensemble;
    // Set for models returned by fit_implicit: the library column used as target.
    std::optional<std::size_t> implicit_lhs;
};

/// Stacked regression rows of a collection: features and targets per
/// trajectory, in input order.
struct RegressionData {
    Eigen::MatrixXd theta;
    Eigen::MatrixXd targets;
    std::vector<std::string> feature_names;
    std::size_t dropped_rows = 0;
};

RegressionData assemble(const TrajectoryCollection& data, const LibrarySpec& library, const DiffSettings& diff,
                        Execution exec = Execution::parallel);

FittedModel fit(const TrajectoryCollection& data, LibraryPtr library, const DiffSettings& diff,
                const OptimizerSpec& opt, const std::optional<EnsembleSpec>& ensemble = std::nullopt,
                const FitOptions& options = {});

/// Theta(data) * Xi, one row per sample in flatten order (or per weak subdomain).
Eigen::MatrixXd predict(const FittedModel& model, const Dataset& data);

/// The quantity `predict` approximates: time derivatives of the states, the
/// weak left-hand side, or the implicit target column.
Eigen::MatrixXd computed_targets(const FittedModel& model, const Dataset& data);

enum class Metric { r2, rmse };

/// Pooled over all samples and targets. R^2 of constant targets is an error.
double score(const FittedModel& model, const Dataset& data, Metric metric = Metric::r2);
double score_values(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& actual, Metric metric);

/// Control input as samples at increasing times, interpolated linearly.
struct ControlSignal {
    std::vector<double> times;
    Eigen::MatrixXd values;  // times x r
    Eigen::VectorXd at(double t) const;
};

struct Trajectory {
    std::vector<double> times;
    Eigen::MatrixXd states;  // times x n
    bool truncated = false;
    std::string message;
};

inline constexpr double kSimulateRelTol = 1e-8;
inline constexpr double kSimulateAbsTol = 1e-10;
inline constexpr double kBlowUpNorm = 1e8;

/// Integrates dq/dt = Theta(q, u) Xi with adaptive Dormand-Prince 5(4) and
/// dense output at `t_eval`. Stops early (truncated) when |q| exceeds 1e8.
Trajectory simulate(const FittedModel& model, const Eigen::VectorXd& initial_state,
                    const std::vector<double>& t_eval, const std::optional<ControlSignal>& controls = std::nullopt);

struct ImplicitCandidate {
    std::string lhs;
    FittedModel model;
    double residual = 0.0;  // ||theta_j - theta_{-j} xi|| / ||theta_j||
    bool degenerate = false;  // the library holds duplicates of the candidate column
    std::vector<std::string> excluded;  // duplicate columns kept out of the regression
};

/// Regresses every candidate column on the remaining ones; sorted by residual.
std::vector<ImplicitCandidate> fit_implicit(const TrajectoryCollection& data, LibraryPtr library,
                                            const DiffSettings& diff, const OptimizerSpec& opt,
                                            const std::vector<std::string>& candidate_lhs,
                                            const FitOptions& options = {});

/// Coefficient rounded to `precision` significant digits, always with a
/// decimal point ("-1.0", "0.99").
std::string format_coefficient(double value, int precision);

/// "<target> = <c1> <name1> + <c2> <name2> + ...", zero terms omitted.
std::vector<std::string> equations(const FittedModel& model, int precision = 3);

struct ParsedEquation {
    std::string target;
    std::map<std::string, double> terms;
};
ParsedEquation parse_equation(const std::string& text);

}  // namespace sindy
