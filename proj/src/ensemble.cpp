#include "sindy/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "sindy/error.hpp"
#include "sindy/random.hpp"

namespace sindy {

using Eigen::Index;

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * double(values.size() - 1);
    const auto lo = std::size_t(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - double(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

void validate(const EnsembleSpec& spec, std::size_t n_rows, std::size_t n_features) {
    if (spec.n_models < 2) throw ConfigError("ensemble needs n_models >= 2");
    if (!(spec.row_fraction > 0.0 && spec.row_fraction <= 1.0)) {
        throw ConfigError("ensemble row fraction must lie in (0, 1]");
    }
    if (spec.n_library_drop < 0) throw ConfigError("ensemble drop count must be >= 0");
    if (n_features > 0 && std::size_t(spec.n_library_drop) >= n_features) {
        throw ConfigError("ensemble would drop every library column");
    }
    if (!(spec.inclusion_threshold >= 0.0 && spec.inclusion_threshold <= 1.0)) {
        throw ConfigError("inclusion threshold must lie in [0, 1]");
    }
    (void)n_rows;
}

namespace {

struct Member {
    std::vector<Index> rows;
    std::vector<Index> columns;  // kept library columns
};

Member draw_member(const EnsembleSpec& spec, Index m, Index p, std::uint64_t index) {
    std::mt19937_64 rng(derive_seed(spec.seed, index));
    Member member;
    const auto count = std::max<Index>(1, Index(std::llround(spec.row_fraction * double(m))));
    if (spec.replace) {
        std::uniform_int_distribution<Index> pick(0, m - 1);
        member.rows.resize(std::size_t(count));
        for (auto& r : member.rows) r = pick(rng);
    } else {
        std::vector<Index> all(static_cast<std::size_t>(m));
        std::iota(all.begin(), all.end(), Index(0));
        if (count < m) {
            std::shuffle(all.begin(), all.end(), rng);
            all.resize(std::size_t(count));
        }
        member.rows = std::move(all);
    }
    std::sort(member.rows.begin(), member.rows.end());

    std::vector<Index> cols(static_cast<std::size_t>(p));
    std::iota(cols.begin(), cols.end(), Index(0));
    if (spec.n_library_drop > 0) {
        std::shuffle(cols.begin(), cols.end(), rng);
        cols.resize(std::size_t(p - spec.n_library_drop));
        std::sort(cols.begin(), cols.end());
    }
    member.columns = std::move(cols);
    return member;
}

Problem member_problem(const Problem& problem, const Member& member) {
    Problem sub;
    const auto nr = Index(member.rows.size()), nc = Index(member.columns.size());
    sub.theta.resize(nr, nc);
    sub.targets.resize(nr, problem.targets.cols());
    if (problem.weights) sub.weights = Eigen::VectorXd(nr);
    for (Index i = 0; i < nr; ++i) {
        const Index r = member.rows[std::size_t(i)];
        for (Index j = 0; j < nc; ++j) sub.theta(i, j) = problem.theta(r, member.columns[std::size_t(j)]);
        sub.targets.row(i) = problem.targets.row(r);
        if (problem.weights) (*sub.weights)(i) = (*problem.weights)(r);
    }
    sub.normalize = problem.normalize;
    for (Index c : member.columns) {
        if (!problem.feature_names.empty()) sub.feature_names.push_back(problem.feature_names[std::size_t(c)]);
    }
    sub.target_names = problem.target_names;
    return sub;
}

// Column indices of a member's coefficient matrix refer to its kept columns;
// constraints (SR3) are restricted the same way.
OptimizerSpec member_optimizer(const OptimizerSpec& opt, const Member& member, Index p, Index n) {
    const auto* sr3 = std::get_if<SR3>(&opt);
    if (!sr3 || !sr3->constraints || Index(member.columns.size()) == p) return opt;
    SR3 copy = *sr3;
    const auto& c = *sr3->constraints;
    const Index pk = Index(member.columns.size());
    Eigen::MatrixXd lhs(c.lhs.rows(), pk * n);
    for (Index t = 0; t < n; ++t) {
        for (Index j = 0; j < pk; ++j) lhs.col(t * pk + j) = c.lhs.col(t * p + member.columns[std::size_t(j)]);
    }
    copy.constraints = EqualityConstraints{lhs, c.rhs};
    return copy;
}

}  // namespace

EnsembleReport fit_ensemble(const Problem& problem, const OptimizerSpec& opt, const EnsembleSpec& spec,
                            Execution exec) {
    validate(problem);
    const Index m = problem.theta.rows(), p = problem.theta.cols(), n = problem.targets.cols();
    validate(spec, std::size_t(m), std::size_t(p));
    validate(opt);

    EnsembleReport report;
    if (spec.row_fraction * double(m) < double(p)) {
        report.warnings.push_back("row_fraction * m is below the library width");
    }

    const auto count = std::size_t(spec.n_models);
    std::vector<std::optional<Eigen::MatrixXd>> results(count);
    std::vector<std::string> errors(count);
    const bool parallel = exec == Execution::parallel;
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(count); ++i) {
        const Member member = draw_member(spec, m, p, std::uint64_t(i));
        try {
            const Coefficients c = solve(member_problem(problem, member), member_optimizer(opt, member, p, n),
                                         Execution::serial);
            Eigen::MatrixXd full = Eigen::MatrixXd::Zero(p, n);
            for (std::size_t j = 0; j < member.columns.size(); ++j) full.row(member.columns[j]) = c.xi.row(Index(j));
            results[std::size_t(i)] = std::move(full);
        } catch (const std::exception& e) {
            errors[std::size_t(i)] = "member " + std::to_string(i) + ": " + e.what();
        }
    }
    for (std::size_t i = 0; i < count; ++i) {
        if (results[i]) report.members.push_back(std::move(*results[i]));
        else report.member_errors.push_back(errors[i]);
    }
    if (report.member_errors.size() * 2 > count) {
        throw FitError("more than half of the ensemble members failed; first error: " + report.member_errors.front());
    }

    const auto k = double(report.members.size());
    report.inclusion_probability = Eigen::MatrixXd::Zero(p, n);
    report.iqr = Eigen::MatrixXd::Zero(p, n);
    Eigen::MatrixXd aggregate = Eigen::MatrixXd::Zero(p, n);
    std::vector<double> sample(report.members.size());
    for (Index t = 0; t < n; ++t) {
        for (Index j = 0; j < p; ++j) {
            std::size_t nonzero = 0;
            for (std::size_t i = 0; i < report.members.size(); ++i) {
                sample[i] = report.members[i](j, t);
                if (sample[i] != 0.0) ++nonzero;
            }
            const double prob = double(nonzero) / k;
            report.inclusion_probability(j, t) = prob;
            report.iqr(j, t) = quantile(sample, 0.75) - quantile(sample, 0.25);
            if (prob < spec.inclusion_threshold || nonzero == 0) continue;
            aggregate(j, t) = spec.aggregator == Aggregator::median
                                  ? quantile(sample, 0.5)
                                  : std::accumulate(sample.begin(), sample.end(), 0.0) / k;
        }
    }

    Coefficients& agg = report.aggregate;
    agg.xi = aggregate;
    agg.support = agg.xi.array() != 0.0;
    agg.names = problem.feature_names;
    if (agg.names.empty()) {
        for (Index j = 0; j < p; ++j) agg.names.push_back("f" + std::to_string(j));
    }
    agg.residuals.resize(n);
    for (Index t = 0; t < n; ++t) {
        Eigen::VectorXd r = problem.targets.col(t) - problem.theta * agg.xi.col(t);
        if (problem.weights) r = r.cwiseProduct(problem.weights->cwiseSqrt());
        agg.residuals(t) = r.norm();
    }
    agg.diagnostics.iterations = int(report.members.size());
    agg.diagnostics.warnings = report.warnings;
    for (const auto& e : report.member_errors) agg.diagnostics.warnings.push_back(e);
    if (agg.support.count() == 0) {
        agg.diagnostics.empty_support = true;
        agg.diagnostics.warnings.push_back("all aggregated coefficients are zero");
    }
    return report;
}

EnsembleSpec parse_ensemble(const std::string& text) {
    EnsembleSpec spec;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("ensemble option '" + item + "' lacks '='");
        const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
        try {
            if (key == "n") spec.n_models = std::stoi(value);
            else if (key == "rows") spec.row_fraction = std::stod(value);
            else if (key == "drop") spec.n_library_drop = std::stoi(value);
            else if (key == "seed") spec.seed = std::stoull(value);
            else if (key == "replace") spec.replace = value == "1" || value == "true";
            else if (key == "threshold") spec.inclusion_threshold = std::stod(value);
            else if (key == "agg") {
                if (value == "median") spec.aggregator = Aggregator::median;
                else if (value == "mean") spec.aggregator = Aggregator::mean;
                else throw ConfigError("ensemble agg must be median or mean");
            } else {
                throw ConfigError("unknown ensemble option '" + key + "'");
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("bad value for ensemble option '" + key + "'");
        }
    }
    validate(spec, 0, 0);
    return spec;
}

}  // namespace sindy
