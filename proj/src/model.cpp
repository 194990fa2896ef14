#include "sindy/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <boost/numeric/odeint.hpp>

#include "sindy/error.hpp"

namespace sindy {

using Eigen::Index;

namespace {

struct Rows {
    Eigen::MatrixXd theta;
    Eigen::MatrixXd targets;
    std::vector<std::string> names;
};

Eigen::MatrixXd time_derivatives(const Dataset& ds, const DiffMethod& method, Execution exec) {
    const auto field = differentiate_dataset(ds, method, kTimeAxis, 1, exec);
    return Eigen::Map<const RowMatrix>(field.data(), Index(ds.sample_count()), Index(ds.n_states()));
}

Rows rows_for(const Dataset& ds, const LibrarySpec& library, const DiffSettings& diff, Execution exec) {
    FeatureMatrix fm = evaluate(library, ds, diff.spatial(), diff.time, exec);
    Rows rows;
    if (fm.weak_lhs) {
        rows.targets = std::move(*fm.weak_lhs);
    } else {
        rows.targets = time_derivatives(ds, diff.time, exec);
    }
    rows.theta = std::move(fm.values);
    rows.names = std::move(fm.names);
    return rows;
}

Eigen::MatrixXd keep_rows(const Eigen::MatrixXd& m, const std::vector<Index>& keep) {
    Eigen::MatrixXd out(Index(keep.size()), m.cols());
    for (std::size_t i = 0; i < keep.size(); ++i) out.row(Index(i)) = m.row(keep[i]);
    return out;
}

Problem make_problem(RegressionData data, const FitOptions& options, std::vector<std::string> target_names) {
    Problem problem;
    problem.theta = std::move(data.theta);
    problem.targets = std::move(data.targets);
    problem.feature_names = std::move(data.feature_names);
    problem.target_names = std::move(target_names);
    problem.normalize = options.normalize;
    return problem;
}

std::vector<std::string> time_target_names(std::size_t n) {
    std::vector<std::string> names;
    for (std::size_t j = 0; j < n; ++j) names.push_back("q" + std::to_string(j) + "_t");
    return names;
}

}  // namespace

RegressionData assemble(const TrajectoryCollection& data, const LibrarySpec& library, const DiffSettings& diff,
                        Execution exec) {
    if (data.size() == 0) throw DataError("no trajectories to fit");
    std::vector<Rows> parts;
    Index total = 0;
    for (const auto& ds : data.members()) {
        parts.push_back(rows_for(ds, library, diff, exec));
        total += parts.back().theta.rows();
    }
    RegressionData out;
    out.feature_names = parts.front().names;
    const Index p = parts.front().theta.cols(), n = parts.front().targets.cols();
    out.theta.resize(total, p);
    out.targets.resize(total, n);
    Index row = 0;
    for (const auto& part : parts) {
        out.theta.middleRows(row, part.theta.rows()) = part.theta;
        out.targets.middleRows(row, part.targets.rows()) = part.targets;
        row += part.theta.rows();
    }

    std::vector<Index> keep;
    keep.reserve(std::size_t(total));
    for (Index r = 0; r < total; ++r) {
        if (out.theta.row(r).allFinite() && out.targets.row(r).allFinite()) keep.push_back(r);
    }
    if (Index(keep.size()) != total) {
        const bool allowed = std::all_of(data.members().begin(), data.members().end(),
                                         [](const Dataset& d) { return d.allow_missing(); });
        if (!allowed) throw DataError("non-finite values in features or targets");
        out.dropped_rows = std::size_t(total) - keep.size();
        out.theta = keep_rows(out.theta, keep);
        out.targets = keep_rows(out.targets, keep);
    }
    if (out.theta.rows() == 0) throw DataError("no usable samples");
    return out;
}

FittedModel fit(const TrajectoryCollection& data, LibraryPtr library, const DiffSettings& diff,
                const OptimizerSpec& opt, const std::optional<EnsembleSpec>& ensemble, const FitOptions& options) {
    if (!library) throw ConfigError("no library given");
    validate(opt);
    const InputLayout layout{data.n_states(), data.n_controls()};
    validate(*library, layout);

    FittedModel model;
    model.library = library;
    model.diff = diff;
    model.optimizer = opt;
    model.layout = layout;
    model.target_names = time_target_names(layout.n_states);

    Problem problem = make_problem(assemble(data, *library, diff, options.exec), options, model.target_names);
    try {
        if (ensemble) {
            model.ensemble = fit_ensemble(problem, opt, *ensemble, options.exec);
            model.coefficients = model.ensemble->aggregate;
        } else {
            model.coefficients = solve(problem, opt, options.exec);
        }
    } catch (const FitError& e) {
        throw FitError(std::string("fit failed (") + name_of(opt) + "): " + e.what());
    }
    return model;
}

Eigen::MatrixXd predict(const FittedModel& model, const Dataset& data) {
    if (data.n_states() != model.layout.n_states || data.n_controls() != model.layout.n_controls) {
        throw DataError("dataset has " + std::to_string(data.n_states()) + " states / " +
                        std::to_string(data.n_controls()) + " controls, model expects " +
                        std::to_string(model.layout.n_states) + " / " + std::to_string(model.layout.n_controls));
    }
    const FeatureMatrix fm = evaluate(*model.library, data, model.diff.spatial(), model.diff.time);
    if (fm.values.cols() != model.coefficients.xi.rows()) throw DataError("library width does not match the model");
    return fm.values * model.coefficients.xi;
}

Eigen::MatrixXd computed_targets(const FittedModel& model, const Dataset& data) {
    if (model.implicit_lhs) {
        const FeatureMatrix fm = evaluate(*model.library, data, model.diff.spatial(), model.diff.time);
        return fm.values.col(Index(*model.implicit_lhs));
    }
    if (is_weak(*model.library)) {
        return *evaluate(*model.library, data, model.diff.spatial(), model.diff.time).weak_lhs;
    }
    return time_derivatives(data, model.diff.time, Execution::parallel);
}

double score_values(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& actual, Metric metric) {
    if (predicted.rows() != actual.rows() || predicted.cols() != actual.cols()) {
        throw DataError("prediction and target shapes differ");
    }
    // Rows with missing values do not count.
    double ss_res = 0.0, sum = 0.0;
    std::size_t count = 0;
    for (Index i = 0; i < actual.rows(); ++i) {
        if (!actual.row(i).allFinite() || !predicted.row(i).allFinite()) continue;
        ss_res += (actual.row(i) - predicted.row(i)).squaredNorm();
        sum += actual.row(i).sum();
        count += std::size_t(actual.cols());
    }
    if (count == 0) throw DataError("no finite samples to score");
    if (metric == Metric::rmse) return std::sqrt(ss_res / double(count));
    const double mean = sum / double(count);
    double ss_tot = 0.0;
    for (Index i = 0; i < actual.rows(); ++i) {
        if (!actual.row(i).allFinite() || !predicted.row(i).allFinite()) continue;
        ss_tot += (actual.row(i).array() - mean).square().sum();
    }
    if (ss_tot == 0.0) throw DataError("R^2 is undefined for constant targets");
    return 1.0 - ss_res / ss_tot;
}

double score(const FittedModel& model, const Dataset& data, Metric metric) {
    return score_values(predict(model, data), computed_targets(model, data), metric);
}

Eigen::VectorXd ControlSignal::at(double t) const {
    if (times.empty()) throw DataError("empty control signal");
    if (t <= times.front()) return values.row(0).transpose();
    if (t >= times.back()) return values.row(values.rows() - 1).transpose();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const auto hi = std::size_t(it - times.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - times[lo]) / (times[hi] - times[lo]);
    return ((1.0 - w) * values.row(Index(lo)) + w * values.row(Index(hi))).transpose();
}

namespace {

struct BlowUp {
    double time;
};

}  // namespace

Trajectory simulate(const FittedModel& model, const Eigen::VectorXd& initial_state, const std::vector<double>& t_eval,
                    const std::optional<ControlSignal>& controls) {
    namespace odeint = boost::numeric::odeint;
    using State = std::vector<double>;
    if (has_derivative_terms(*model.library)) throw ConfigError("cannot simulate a model with derivative features");
    if (model.implicit_lhs) throw ConfigError("cannot simulate an implicit model");
    const std::size_t n = model.layout.n_states;
    if (std::size_t(initial_state.size()) != n) throw DataError("initial state has the wrong dimension");
    if (model.layout.n_controls > 0 && !controls) throw DataError("model needs a control signal");
    if (controls && std::size_t(controls->values.cols()) != model.layout.n_controls) {
        throw DataError("control signal has the wrong dimension");
    }
    if (t_eval.empty()) throw DataError("no evaluation times");
    for (std::size_t i = 1; i < t_eval.size(); ++i) {
        if (!(t_eval[i] > t_eval[i - 1])) throw DataError("evaluation times must increase");
    }

    const Eigen::MatrixXd xi_t = model.coefficients.xi.transpose();
    auto rhs = [&](const State& q, State& dq, double t) {
        Eigen::VectorXd u;
        if (controls) u = controls->at(t);
        const Eigen::VectorXd theta =
            evaluate_pointwise(*model.library, q, std::span<const double>(u.data(), std::size_t(u.size())));
        const Eigen::VectorXd out = xi_t * theta;
        dq.assign(out.data(), out.data() + out.size());
    };

    Trajectory traj;
    std::vector<State> saved;
    auto observer = [&](const State& q, double t) {
        double norm = 0.0;
        for (double v : q) norm += v * v;
        norm = std::sqrt(norm);
        if (!(norm <= kBlowUpNorm)) throw BlowUp{t};
        saved.push_back(q);
        traj.times.push_back(t);
    };

    State q(initial_state.data(), initial_state.data() + initial_state.size());
    if (t_eval.size() == 1) {
        observer(q, t_eval.front());
    } else {
        auto stepper = odeint::make_dense_output(kSimulateAbsTol, kSimulateRelTol, odeint::runge_kutta_dopri5<State>());
        const double dt0 = (t_eval[1] - t_eval[0]) * 0.1;
        try {
            odeint::integrate_times(stepper, rhs, q, t_eval.begin(), t_eval.end(), dt0, observer);
        } catch (const BlowUp& b) {
            traj.truncated = true;
            traj.message = "state norm exceeded 1e8 at t=" + std::to_string(b.time);
        } catch (const odeint::no_progress_error& e) {
            traj.truncated = true;
            traj.message = std::string("integrator stalled: ") + e.what();
        }
    }
    traj.states.resize(Index(saved.size()), Index(n));
    for (std::size_t i = 0; i < saved.size(); ++i) {
        for (std::size_t j = 0; j < n; ++j) traj.states(Index(i), Index(j)) = saved[i][j];
    }
    return traj;
}

std::vector<ImplicitCandidate> fit_implicit(const TrajectoryCollection& data, LibraryPtr library,
                                            const DiffSettings& diff, const OptimizerSpec& opt,
                                            const std::vector<std::string>& candidate_lhs,
                                            const FitOptions& options) {
    if (!library) throw ConfigError("no library given");
    validate(opt);
    const InputLayout layout{data.n_states(), data.n_controls()};
    validate(*library, layout);
    if (is_weak(*library)) throw ConfigError("implicit identification needs a pointwise library");
    const RegressionData rows = assemble(data, *library, diff, options.exec);
    const Index p = rows.theta.cols();

    std::vector<ImplicitCandidate> out;
    for (const auto& name : candidate_lhs) {
        const auto it = std::find(rows.feature_names.begin(), rows.feature_names.end(), name);
        if (it == rows.feature_names.end()) throw ConfigError("candidate '" + name + "' is not a library column");
        const Index j = Index(it - rows.feature_names.begin());
        const Eigen::VectorXd lhs = rows.theta.col(j);
        const double lhs_norm = lhs.norm();
        if (lhs_norm == 0.0) throw DataError("candidate column '" + name + "' is identically zero");

        ImplicitCandidate cand;
        cand.lhs = name;
        std::vector<Index> keep;
        for (Index k = 0; k < p; ++k) {
            if (k == j) continue;
            const double kn = rows.theta.col(k).norm();
            if (kn > 0.0 && std::abs(std::abs(rows.theta.col(k).dot(lhs)) - kn * lhs_norm) <= 1e-12 * kn * lhs_norm) {
                cand.excluded.push_back(rows.feature_names[std::size_t(k)]);
                continue;
            }
            keep.push_back(k);
        }
        cand.degenerate = !cand.excluded.empty();

        Problem problem;
        problem.theta.resize(rows.theta.rows(), Index(keep.size()));
        for (std::size_t c = 0; c < keep.size(); ++c) {
            problem.theta.col(Index(c)) = rows.theta.col(keep[c]);
            problem.feature_names.push_back(rows.feature_names[std::size_t(keep[c])]);
        }
        problem.targets = lhs;
        problem.target_names = {name};
        problem.normalize = options.normalize;
        Coefficients sub = solve(problem, opt, options.exec);

        Coefficients full;
        full.xi = Eigen::MatrixXd::Zero(p, 1);
        for (std::size_t c = 0; c < keep.size(); ++c) full.xi(keep[c], 0) = sub.xi(Index(c), 0);
        full.support = full.xi.array() != 0.0;
        full.names = rows.feature_names;
        full.residuals = sub.residuals;
        full.diagnostics = sub.diagnostics;

        cand.residual = (lhs - rows.theta * full.xi).norm() / lhs_norm;
        cand.model.coefficients = std::move(full);
        cand.model.library = library;
        cand.model.diff = diff;
        cand.model.optimizer = opt;
        cand.model.layout = layout;
        cand.model.target_names = {name};
        cand.model.implicit_lhs = std::size_t(j);
        out.push_back(std::move(cand));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const ImplicitCandidate& a, const ImplicitCandidate& b) { return a.residual < b.residual; });
    return out;
}

std::string format_coefficient(double value, int precision) {
    if (precision < 1) precision = 1;
    if (value == 0.0) return "0.0";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*e", precision - 1, value);
    const double rounded = std::strtod(buf, nullptr);
    const int exponent = int(std::floor(std::log10(std::abs(rounded))));
    const int decimals = std::max(1, precision - 1 - exponent);
    std::snprintf(buf, sizeof buf, "%.*f", decimals, rounded);
    return buf;
}

std::vector<std::string> equations(const FittedModel& model, int precision) {
    std::vector<std::string> out;
    const auto& c = model.coefficients;
    for (Index t = 0; t < c.xi.cols(); ++t) {
        std::string rhs;
        for (Index k = 0; k < c.xi.rows(); ++k) {
            const double v = c.xi(k, t);
            if (v == 0.0) continue;
            if (!rhs.empty()) rhs += " + ";
            rhs += format_coefficient(v, precision);
            if (c.names[std::size_t(k)] != "1") rhs += " " + c.names[std::size_t(k)];
        }
        out.push_back(model.target_names[std::size_t(t)] + " = " + (rhs.empty() ? "0" : rhs));
    }
    return out;
}

ParsedEquation parse_equation(const std::string& text) {
    ParsedEquation eq;
    const auto sep = text.find(" = ");
    if (sep == std::string::npos) throw DataError("equation lacks ' = ': " + text);
    eq.target = text.substr(0, sep);
    const std::string rhs = text.substr(sep + 3);
    if (rhs == "0") return eq;
    std::size_t pos = 0;
    while (pos <= rhs.size()) {
        std::size_t end = rhs.find(" + ", pos);
        if (end == std::string::npos) end = rhs.size();
        const std::string term = rhs.substr(pos, end - pos);
        const auto space = term.find(' ');
        const std::string coef = term.substr(0, space);
        const std::string name = space == std::string::npos ? "1" : term.substr(space + 1);
        try {
            eq.terms[name] += std::stod(coef);
        } catch (const std::exception&) {
            throw DataError("bad coefficient '" + coef + "' in equation");
        }
        pos = end + 3;
    }
    return eq;
}

}  // namespace sindy
