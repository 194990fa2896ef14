#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sindy/execution.hpp"
#include "sindy/optimize.hpp"

namespace sindy {

enum class Aggregator { median, mean };

struct EnsembleSpec {
    int n_models = 20;
    double row_fraction = 0.6;
    bool replace = true;
    int n_library_drop = 0;
    Aggregator aggregator = Aggregator::median;
    double inclusion_threshold = 0.5;
    std::uint64_t seed = 0;
};

struct EnsembleReport {
    std::vector<Eigen::MatrixXd> members;  // p x n each, successful members only
    std::vector<std::string> member_errors;  // one per failed member
    Coefficients aggregate;
    Eigen::MatrixXd inclusion_probability;  // p x n
    Eigen::MatrixXd iqr;                    // p x n
    std::vector<std::string> warnings;
};

void validate(const EnsembleSpec& spec, std::size_t n_rows, std::size_t n_features);

/// Fits `n_models` bagged / library-dropped members and aggregates them.
/// Member i draws from a generator seeded with splitmix64(seed + i).
EnsembleReport fit_ensemble(const Problem& problem, const OptimizerSpec& opt, const EnsembleSpec& spec,
                            Execution exec = Execution::parallel);

/// Parses `n=20,rows=0.6,drop=0,agg=median,seed=0[,replace=0|1]`.
EnsembleSpec parse_ensemble(const std::string& text);

/// Sample quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

}  // namespace sindy
