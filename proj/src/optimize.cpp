#include "sindy/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "sindy/error.hpp"

namespace sindy {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

using Index = Eigen::Index;
using IndexList = std::vector<Index>;

// Problem after row weighting, zero-column removal and optional scaling.
struct Prepared {
    Eigen::MatrixXd A;         // m x pa
    Eigen::MatrixXd Y;         // m x n
    Eigen::MatrixXd gram;      // pa x pa
    Eigen::MatrixXd moments;   // pa x n  (A^T Y)
    IndexList columns;         // reduced -> original column
    Eigen::VectorXd scale;     // original coefficient = reduced / scale
    std::vector<std::size_t> dropped;
    Index p = 0;
};

Prepared prepare(const Problem& problem) {
    validate(problem);
    Prepared prep;
    prep.p = problem.theta.cols();
    Eigen::MatrixXd theta = problem.theta;
    prep.Y = problem.targets;
    if (problem.weights) {
        const Eigen::VectorXd root = problem.weights->cwiseSqrt();
        theta = root.asDiagonal() * theta;
        prep.Y = root.asDiagonal() * prep.Y;
    }
    std::vector<double> scales;
    for (Index k = 0; k < theta.cols(); ++k) {
        const double norm = theta.col(k).norm();
        if (norm == 0.0) {
            prep.dropped.push_back(std::size_t(k));
            continue;
        }
        prep.columns.push_back(k);
        scales.push_back(problem.normalize ? 1.0 / norm : 1.0);
    }
    prep.A.resize(theta.rows(), Index(prep.columns.size()));
    prep.scale.resize(Index(prep.columns.size()));
    for (std::size_t a = 0; a < prep.columns.size(); ++a) {
        prep.A.col(Index(a)) = theta.col(prep.columns[a]) * scales[a];
        prep.scale(Index(a)) = scales[a];
    }
    prep.gram = prep.A.transpose() * prep.A;
    prep.moments = prep.A.transpose() * prep.Y;
    return prep;
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, const IndexList& idx) {
    Eigen::VectorXd out(Index(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out(Index(i)) = v(idx[i]);
    return out;
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, const IndexList& idx) {
    Eigen::MatrixXd out(Index(idx.size()), Index(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t j = 0; j < idx.size(); ++j) out(Index(i), Index(j)) = m(idx[i], idx[j]);
    }
    return out;
}

struct SubsetSolve {
    Eigen::VectorXd coef;  // length = active.size()
    bool rank_deficient = false;
};

// Ridge (or, with alpha = 0, minimum-norm least squares) on the active columns
// using the Gram matrix: (G_S + alpha I) x = b_S.
SubsetSolve solve_subset(const Eigen::MatrixXd& gram, const Eigen::VectorXd& moments,
                         const IndexList& active, double alpha) {
    SubsetSolve out;
    if (active.empty()) return out;
    Eigen::MatrixXd G = gather(gram, active);
    G.diagonal().array() += alpha;
    const Eigen::VectorXd b = gather(moments, active);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(G);
    cod.setThreshold(1e-13);
    out.rank_deficient = cod.rank() < G.cols();
    out.coef = cod.solve(b);
    return out;
}

double column_residual(const Prepared& prep, Index target, const Eigen::VectorXd& coef_reduced) {
    return (prep.Y.col(target) - prep.A * coef_reduced).norm();
}

Eigen::VectorXd scatter(const IndexList& active, const Eigen::VectorXd& values, Index size) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(size);
    for (std::size_t i = 0; i < active.size(); ++i) out(active[i]) = values(Index(i));
    return out;
}

IndexList all_reduced(const Prepared& prep) {
    IndexList idx(prep.columns.size());
    std::iota(idx.begin(), idx.end(), Index(0));
    return idx;
}

// Reduced (pa x n) coefficients -> original p x n coefficients and residuals.
Coefficients finish(const Problem& problem, const Prepared& prep, const Eigen::MatrixXd& reduced,
                    Diagnostics diag) {
    Coefficients out;
    const Index n = problem.targets.cols();
    out.xi = Eigen::MatrixXd::Zero(prep.p, n);
    for (std::size_t a = 0; a < prep.columns.size(); ++a) {
        for (Index t = 0; t < n; ++t) {
            const double v = reduced(Index(a), t);
            out.xi(prep.columns[a], t) = v == 0.0 ? 0.0 : v * prep.scale(Index(a));
        }
    }
    out.support = out.xi.array() != 0.0;
    out.names = problem.feature_names;
    if (out.names.empty()) {
        for (Index k = 0; k < prep.p; ++k) out.names.push_back("f" + std::to_string(k));
    }
    out.residuals.resize(n);
    Eigen::MatrixXd fitted = problem.theta * out.xi;
    for (Index t = 0; t < n; ++t) {
        Eigen::VectorXd r = problem.targets.col(t) - fitted.col(t);
        if (problem.weights) r = r.cwiseProduct(problem.weights->cwiseSqrt());
        out.residuals(t) = r.norm();
    }
    diag.dropped_columns = prep.dropped;
    if (out.support.count() == 0 && !diag.empty_support) {
        diag.empty_support = true;
        diag.warnings.push_back("all coefficients are zero");
    }
    out.diagnostics = std::move(diag);
    return out;
}

// ---------------------------------------------------------------------------

struct TargetResult {
    Eigen::VectorXd coef;  // reduced
    bool converged = true;
    bool rank_deficient = false;
    bool empty_before_convergence = false;
    int iterations = 0;
    std::vector<double> history;
};

TargetResult stlsq_target(const Prepared& prep, Index t, const STLSQ& spec) {
    TargetResult r;
    const Index pa = Index(prep.columns.size());
    IndexList active = all_reduced(prep);
    auto fit = solve_subset(prep.gram, prep.moments.col(t), active, spec.alpha);
    r.rank_deficient |= fit.rank_deficient;
    Eigen::VectorXd coef = scatter(active, fit.coef, pa);
    r.history.push_back(column_residual(prep, t, coef));
    r.converged = false;
    for (int it = 0; it < spec.max_iter; ++it) {
        r.iterations = it + 1;
        IndexList keep;
        for (Index k : active) {
            if (std::abs(coef(k)) >= spec.threshold) keep.push_back(k);
        }
        if (keep.size() == active.size()) {
            r.converged = true;
            break;
        }
        active = std::move(keep);
        for (Index k = 0; k < pa; ++k) {
            if (std::find(active.begin(), active.end(), k) == active.end()) coef(k) = 0.0;
        }
        r.history.push_back(column_residual(prep, t, coef));
        if (active.empty()) {
            r.empty_before_convergence = true;
            r.history.push_back(r.history.back());
            break;
        }
        fit = solve_subset(prep.gram, prep.moments.col(t), active, spec.alpha);
        r.rank_deficient |= fit.rank_deficient;
        coef = scatter(active, fit.coef, pa);
        r.history.push_back(column_residual(prep, t, coef));
    }
    r.coef = coef;
    return r;
}

Coefficients solve_stlsq(const Problem& problem, const STLSQ& spec, Execution exec) {
    const Prepared prep = prepare(problem);
    const Index n = prep.Y.cols();
    std::vector<TargetResult> results(static_cast<std::size_t>(n));
    const bool parallel = exec == Execution::parallel;
#pragma omp parallel for schedule(static) if (parallel)
    for (Index t = 0; t < n; ++t) results[std::size_t(t)] = stlsq_target(prep, t, spec);

    Eigen::MatrixXd reduced(Index(prep.columns.size()), n);
    Diagnostics diag;
    for (Index t = 0; t < n; ++t) {
        const auto& r = results[std::size_t(t)];
        reduced.col(t) = r.coef;
        diag.converged = diag.converged && r.converged;
        diag.rank_deficient = diag.rank_deficient || r.rank_deficient;
        diag.iterations = std::max(diag.iterations, r.iterations);
        diag.residual_history.push_back(r.history);
        if (r.empty_before_convergence) {
            diag.empty_support = true;
            diag.warnings.push_back("STLSQ threshold removed every term for target " + std::to_string(t));
        }
    }
    if (!diag.converged) diag.warnings.push_back("STLSQ reached max_iter before the support settled");
    if (diag.rank_deficient) diag.warnings.push_back("singular active-set system; minimum-norm solution used");
    return finish(problem, prep, reduced, std::move(diag));
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd prox(const Eigen::MatrixXd& x, const SR3& spec) {
    Eigen::MatrixXd w = x;
    if (spec.regularizer == Regularizer::l0) {
        const double level = std::sqrt(2.0 * spec.threshold * spec.nu);
        w = w.unaryExpr([&](double v) { return hard_threshold(v, level); });
    } else {
        const double level = spec.threshold * spec.nu;
        w = w.unaryExpr([&](double v) { return soft_threshold(v, level); });
    }
    return w;
}

// Constraint matrix restated over the reduced, scaled variables (target-major).
Eigen::MatrixXd reduce_constraints(const EqualityConstraints& c, const Prepared& prep, Index n) {
    const Index pa = Index(prep.columns.size());
    Eigen::MatrixXd out(c.lhs.rows(), pa * n);
    for (Index t = 0; t < n; ++t) {
        for (Index a = 0; a < pa; ++a) {
            out.col(t * pa + a) = c.lhs.col(t * prep.p + prep.columns[std::size_t(a)]) * prep.scale(a);
        }
    }
    return out;
}

Eigen::VectorXd kkt_solve(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Eigen::MatrixXd& C,
                          const Eigen::VectorXd& d) {
    const Index nv = H.rows(), nc = C.rows();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nv + nc, nv + nc);
    K.topLeftCorner(nv, nv) = H;
    K.topRightCorner(nv, nc) = C.transpose();
    K.bottomLeftCorner(nc, nv) = C;
    Eigen::VectorXd rhs(nv + nc);
    rhs << g, d;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(K);
    return cod.solve(rhs).head(nv);
}

Eigen::VectorXd vec(const Eigen::MatrixXd& m) { return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()); }

Eigen::MatrixXd unvec(const Eigen::VectorXd& v, Index rows, Index cols) {
    return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

Coefficients solve_sr3(const Problem& problem, const SR3& spec) {
    const Prepared prep = prepare(problem);
    const Index n = prep.Y.cols();
    const Index pa = Index(prep.columns.size());
    Diagnostics diag;
    if (spec.constraints && spec.constraints->lhs.cols() != prep.p * n) {
        throw ConfigError("constraint matrix needs p * n = " + std::to_string(prep.p * n) + " columns");
    }

    Eigen::MatrixXd H = prep.gram;
    H.diagonal().array() += 1.0 / spec.nu;
    Eigen::MatrixXd Cr;
    Eigen::MatrixXd Hbig;
    if (spec.constraints) {
        Cr = reduce_constraints(*spec.constraints, prep, n);
        Hbig = Eigen::MatrixXd::Zero(pa * n, pa * n);
        for (Index t = 0; t < n; ++t) Hbig.block(t * pa, t * pa, pa, pa) = H;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);

    auto relaxed_solve = [&](const Eigen::MatrixXd& W) -> Eigen::MatrixXd {
        const Eigen::MatrixXd rhs = prep.moments + W / spec.nu;
        if (!spec.constraints) return ldlt.solve(rhs);
        return unvec(kkt_solve(Hbig, vec(rhs), Cr, spec.constraints->rhs), pa, n);
    };

    // Start from the least-squares solution.
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> ls(prep.gram);
    Eigen::MatrixXd xi = ls.solve(prep.moments);
    diag.rank_deficient = ls.rank() < pa;
    Eigen::MatrixXd W = prox(xi, spec);
    diag.converged = false;
    const double size = std::sqrt(double(std::max<Index>(1, pa * n)));
    for (int it = 0; it < spec.max_iter; ++it) {
        diag.iterations = it + 1;
        xi = relaxed_solve(W);
        W = prox(xi, spec);
        if ((xi - W).norm() / size < spec.tol) {
            diag.converged = true;
            break;
        }
    }
    if (!diag.converged) diag.warnings.push_back("SR3 reached max_iter before ||Xi - W|| < tol");

    Eigen::MatrixXd result = W;
    if (spec.constraints) {
        // Constrained least squares on the sparse support (plus every variable
        // the constraints touch), so the output is both sparse and feasible.
        std::vector<Index> fixed_zero;
        for (Index t = 0; t < n; ++t) {
            for (Index a = 0; a < pa; ++a) {
                const Index v = t * pa + a;
                if (W(a, t) == 0.0 && Cr.col(v).cwiseAbs().maxCoeff() == 0.0) fixed_zero.push_back(v);
            }
        }
        Eigen::MatrixXd E(Cr.rows() + Index(fixed_zero.size()), pa * n);
        E.setZero();
        E.topRows(Cr.rows()) = Cr;
        Eigen::VectorXd e = Eigen::VectorXd::Zero(E.rows());
        e.head(Cr.rows()) = spec.constraints->rhs;
        for (std::size_t i = 0; i < fixed_zero.size(); ++i) E(Cr.rows() + Index(i), fixed_zero[i]) = 1.0;
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(pa * n, pa * n);
        for (Index t = 0; t < n; ++t) G.block(t * pa, t * pa, pa, pa) = prep.gram;
        Eigen::VectorXd x = kkt_solve(G, vec(prep.moments), E, e);
        for (Index v : fixed_zero) x(v) = 0.0;
        const double violation = (Cr * x - spec.constraints->rhs).cwiseAbs().maxCoeff();
        if (!(violation <= 1e-8)) {
            throw FitError("equality constraints are infeasible (violation " + std::to_string(violation) + ")");
        }
        result = unvec(x, pa, n);
    }
    return finish(problem, prep, result, std::move(diag));
}

// ---------------------------------------------------------------------------

Path ssr_path_target(const Prepared& prep, const Eigen::MatrixXd& gram, const Eigen::MatrixXd& moments,
                     const Eigen::MatrixXd& A, const Eigen::MatrixXd& Y, Index t) {
    Path path;
    const Index pa = Index(prep.columns.size());
    IndexList active = all_reduced(prep);
    const Eigen::VectorXd norms = A.colwise().norm().transpose();
    while (!active.empty()) {
        const auto fit = solve_subset(gram, moments.col(t), active, 0.0);
        const Eigen::VectorXd coef = scatter(active, fit.coef, pa);
        path.push_back({coef, active.size(), (Y.col(t) - A * coef).norm()});
        std::size_t weakest = 0;
        double smallest = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < active.size(); ++i) {
            const double importance = std::abs(fit.coef(Index(i))) * norms(active[i]);
            if (importance < smallest) {
                smallest = importance;
                weakest = i;
            }
        }
        active.erase(active.begin() + std::ptrdiff_t(weakest));
    }
    return path;
}

Path frols_path_target(const Prepared& prep, Index t, const FROLS& spec) {
    Path path;
    const Index pa = Index(prep.columns.size());
    const Eigen::VectorXd y = prep.Y.col(t);
    const double yy = y.squaredNorm();
    if (yy == 0.0 || pa == 0) return path;
    const Index limit = spec.max_terms > 0 ? std::min<Index>(spec.max_terms, pa) : pa;

    Eigen::MatrixXd W = prep.A;  // candidates orthogonalized against the selection
    const Eigen::VectorXd original_norm2 = prep.A.colwise().squaredNorm().transpose();
    std::vector<bool> chosen(std::size_t(pa), false);
    IndexList selected;
    for (Index step = 0; step < limit; ++step) {
        Index best = -1;
        double best_err = -1.0;
        for (Index k = 0; k < pa; ++k) {
            if (chosen[std::size_t(k)]) continue;
            const double ww = W.col(k).squaredNorm();
            if (ww <= 1e-12 * original_norm2(k)) continue;  // dependent on the selection
            const double wy = W.col(k).dot(y);
            const double err = wy * wy / (ww * yy);
            if (err > best_err) {
                best_err = err;
                best = k;
            }
        }
        if (best < 0 || best_err < spec.err_tol) break;
        chosen[std::size_t(best)] = true;
        selected.push_back(best);
        const Eigen::VectorXd q = W.col(best);
        const double qq = q.squaredNorm();
        for (Index k = 0; k < pa; ++k) {
            if (!chosen[std::size_t(k)]) W.col(k) -= (q.dot(W.col(k)) / qq) * q;
        }
        const auto fit = solve_subset(prep.gram, prep.moments.col(t), selected, 0.0);
        const Eigen::VectorXd coef = scatter(selected, fit.coef, pa);
        path.push_back({coef, selected.size(), column_residual(prep, t, coef)});
    }
    return path;
}

// Reduced-space path entries -> original coordinates.
Path expand_path(const Path& reduced, const Prepared& prep) {
    Path out;
    for (const auto& e : reduced) {
        Eigen::VectorXd xi = Eigen::VectorXd::Zero(prep.p);
        for (std::size_t a = 0; a < prep.columns.size(); ++a) {
            const double v = e.xi(Index(a));
            xi(prep.columns[a]) = v == 0.0 ? 0.0 : v * prep.scale(Index(a));
        }
        out.push_back({std::move(xi), e.sparsity, e.residual});
    }
    return out;
}

Eigen::VectorXd ssr_select_holdout(const Prepared& prep, Index t, const SSR& spec) {
    const Index m = prep.A.rows();
    const Index pa = Index(prep.columns.size());
    std::vector<Index> rows(static_cast<std::size_t>(m));
    std::iota(rows.begin(), rows.end(), Index(0));
    std::mt19937_64 rng(spec.seed);
    std::shuffle(rows.begin(), rows.end(), rng);
    const Index n_hold = std::max<Index>(1, Index(std::floor(0.25 * double(m))));
    if (m - n_hold < 1) throw FitError("too few rows for the SSR holdout split");
    Eigen::MatrixXd A_fit(m - n_hold, pa), A_hold(n_hold, pa);
    Eigen::VectorXd y_fit(m - n_hold), y_hold(n_hold);
    for (Index i = 0; i < m; ++i) {
        const Index r = rows[std::size_t(i)];
        if (i < n_hold) {
            A_hold.row(i) = prep.A.row(r);
            y_hold(i) = prep.Y(r, t);
        } else {
            A_fit.row(i - n_hold) = prep.A.row(r);
            y_fit(i - n_hold) = prep.Y(r, t);
        }
    }
    const Eigen::MatrixXd gram = A_fit.transpose() * A_fit;
    const Eigen::MatrixXd moments = A_fit.transpose() * y_fit;
    const Path path = ssr_path_target(prep, gram, moments, A_fit, y_fit, 0);

    // One-standard-error rule: the sparsest model whose holdout error is within
    // one standard error of the best one wins.
    std::vector<double> err;
    std::vector<Eigen::VectorXd> sq;
    for (const auto& e : path) {
        sq.push_back((y_hold - A_hold * e.xi).array().square().matrix());
        err.push_back(sq.back().mean());
    }
    const std::size_t cap = spec.max_terms > 0 ? std::size_t(spec.max_terms) : std::size_t(pa);
    std::size_t best = path.size();
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (path[i].sparsity <= cap && (best == path.size() || err[i] < err[best])) best = i;
    }
    double se = 0.0;
    if (n_hold > 1) {
        const double var = (sq[best].array() - err[best]).square().sum() / double(n_hold - 1);
        se = std::sqrt(var / double(n_hold));
    }
    const double floor_err = 1e-14 * y_hold.squaredNorm() / double(n_hold);
    std::size_t pick = best;
    for (std::size_t i = path.size(); i-- > 0;) {
        if (path[i].sparsity <= cap && err[i] <= err[best] + se + floor_err) {
            pick = i;
            break;
        }
    }
    IndexList support;
    for (Index k = 0; k < pa; ++k) {
        if (path[pick].xi(k) != 0.0) support.push_back(k);
    }
    const auto fit = solve_subset(prep.gram, prep.moments.col(t), support, 0.0);
    return scatter(support, fit.coef, pa);
}

Coefficients solve_greedy(const Problem& problem, const OptimizerSpec& spec, Execution exec) {
    const Prepared prep = prepare(problem);
    const Index n = prep.Y.cols();
    const Index pa = Index(prep.columns.size());
    Eigen::MatrixXd reduced = Eigen::MatrixXd::Zero(pa, n);
    Diagnostics diag;
    std::vector<int> steps(std::size_t(n), 0);
    const bool parallel = exec == Execution::parallel;
#pragma omp parallel for schedule(static) if (parallel)
    for (Index t = 0; t < n; ++t) {
        if (const auto* ssr = std::get_if<SSR>(&spec)) {
            if (pa == 0) continue;
            if (ssr->selection == PathSelection::holdout) {
                reduced.col(t) = ssr_select_holdout(prep, t, *ssr);
            } else {
                const Path path = ssr_path_target(prep, prep.gram, prep.moments, prep.A, prep.Y, t);
                const std::size_t cap = ssr->max_terms > 0 ? std::size_t(ssr->max_terms) : std::size_t(pa);
                for (const auto& e : path) {
                    if (e.sparsity <= cap) {
                        reduced.col(t) = e.xi;
                        break;
                    }
                }
            }
            steps[std::size_t(t)] = int(pa);
        } else {
            const Path path = frols_path_target(prep, t, std::get<FROLS>(spec));
            if (!path.empty()) reduced.col(t) = path.back().xi;
            steps[std::size_t(t)] = int(path.size());
        }
    }
    diag.iterations = *std::max_element(steps.begin(), steps.end());
    return finish(problem, prep, reduced, std::move(diag));
}

}  // namespace

double hard_threshold(double x, double level) { return std::abs(x) > level ? x : 0.0; }

double soft_threshold(double x, double level) {
    const double mag = std::abs(x) - level;
    return mag > 0.0 ? std::copysign(mag, x) : 0.0;
}

void validate(const Problem& problem) {
    if (problem.theta.rows() < 1 || problem.theta.cols() < 1) throw DataError("empty feature matrix");
    if (problem.targets.rows() != problem.theta.rows()) {
        throw DataError("feature matrix has " + std::to_string(problem.theta.rows()) + " rows, targets have " +
                        std::to_string(problem.targets.rows()));
    }
    if (problem.targets.cols() < 1) throw DataError("no target columns");
    if (!problem.theta.allFinite() || !problem.targets.allFinite()) throw DataError("non-finite regression data");
    if (problem.weights) {
        if (problem.weights->size() != problem.theta.rows()) throw DataError("weights do not match rows");
        if ((problem.weights->array() < 0.0).any()) throw DataError("negative sample weight");
    }
    if (!problem.feature_names.empty() && Eigen::Index(problem.feature_names.size()) != problem.theta.cols()) {
        throw DataError("feature names do not match columns");
    }
}

void validate(const OptimizerSpec& spec) {
    std::visit(overloaded{
                   [](const STLSQ& s) {
                       if (!(s.threshold >= 0.0)) throw ConfigError("stlsq threshold must be >= 0");
                       if (!(s.alpha >= 0.0)) throw ConfigError("stlsq alpha must be >= 0");
                       if (s.max_iter < 1) throw ConfigError("stlsq max_iter must be >= 1");
                   },
                   [](const SR3& s) {
                       if (!(s.threshold >= 0.0)) throw ConfigError("sr3 threshold must be >= 0");
                       if (!(s.nu > 0.0)) throw ConfigError("sr3 nu must be > 0");
                       if (s.max_iter < 1) throw ConfigError("sr3 max_iter must be >= 1");
                       if (!(s.tol > 0.0)) throw ConfigError("sr3 tol must be > 0");
                       if (s.constraints) {
                           const auto& c = *s.constraints;
                           if (c.lhs.rows() != c.rhs.size()) throw ConfigError("constraint rows and rhs differ");
                           if (c.lhs.rows() > c.lhs.cols()) throw ConfigError("more constraints than unknowns");
                           Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(c.lhs);
                           cod.setThreshold(1e-10);
                           if (cod.rank() < c.lhs.rows()) throw ConfigError("constraint matrix is not full row rank");
                       }
                   },
                   [](const SSR& s) {
                       if (s.max_terms < 0) throw ConfigError("ssr max_terms must be >= 0");
                   },
                   [](const FROLS& f) {
                       if (f.max_terms < 0) throw ConfigError("frols max_terms must be >= 0");
                       if (!(f.err_tol >= 0.0)) throw ConfigError("frols err_tol must be >= 0");
                   },
               },
               spec);
}

Coefficients solve(const Problem& problem, const OptimizerSpec& spec, Execution exec) {
    validate(spec);
    return std::visit(overloaded{
                          [&](const STLSQ& s) { return solve_stlsq(problem, s, exec); },
                          [&](const SR3& s) { return solve_sr3(problem, s); },
                          [&](const auto&) { return solve_greedy(problem, spec, exec); },
                      },
                      spec);
}

std::vector<Path> solve_path(const Problem& problem, const OptimizerSpec& spec, Execution exec) {
    validate(spec);
    if (!std::holds_alternative<SSR>(spec) && !std::holds_alternative<FROLS>(spec)) {
        throw ConfigError("solve_path needs a greedy optimizer (ssr or frols)");
    }
    const Prepared prep = prepare(problem);
    const Index n = prep.Y.cols();
    std::vector<Path> paths(static_cast<std::size_t>(n));
    const bool parallel = exec == Execution::parallel;
#pragma omp parallel for schedule(static) if (parallel)
    for (Index t = 0; t < n; ++t) {
        Path reduced = std::holds_alternative<SSR>(spec)
                           ? ssr_path_target(prep, prep.gram, prep.moments, prep.A, prep.Y, t)
                           : frols_path_target(prep, t, std::get<FROLS>(spec));
        paths[std::size_t(t)] = expand_path(reduced, prep);
    }
    return paths;
}

OptimizerSpec parse_optimizer(const std::string& text) {
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    std::vector<std::string> args;
    if (colon != std::string::npos) {
        std::stringstream ss(text.substr(colon + 1));
        std::string item;
        while (std::getline(ss, item, ',')) args.push_back(item);
    }
    auto num = [&](std::size_t i) {
        try {
            std::size_t used = 0;
            const double v = std::stod(args.at(i), &used);
            if (used != args[i].size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("bad optimizer argument in '" + text + "'");
        }
    };
    OptimizerSpec spec;
    if (kind == "stlsq") {
        STLSQ s;
        if (args.size() > 2) throw ConfigError("stlsq takes at most λ,α");
        if (args.size() >= 1) s.threshold = num(0);
        if (args.size() >= 2) s.alpha = num(1);
        spec = s;
    } else if (kind == "sr3") {
        SR3 s;
        if (args.size() > 3) throw ConfigError("sr3 takes at most λ,ν,l0|l1");
        if (args.size() >= 1) s.threshold = num(0);
        if (args.size() >= 2) s.nu = num(1);
        if (args.size() >= 3) {
            if (args[2] == "l0") s.regularizer = Regularizer::l0;
            else if (args[2] == "l1") s.regularizer = Regularizer::l1;
            else throw ConfigError("sr3 regularizer must be l0 or l1");
        }
        spec = s;
    } else if (kind == "ssr") {
        SSR s;
        if (args.size() > 1) throw ConfigError("ssr takes at most max_terms");
        if (args.size() == 1) s.max_terms = int(num(0));
        spec = s;
    } else if (kind == "frols") {
        FROLS f;
        if (args.size() > 1) throw ConfigError("frols takes at most max_terms");
        if (args.size() == 1) f.max_terms = int(num(0));
        spec = f;
    } else {
        throw ConfigError("unknown optimizer '" + text + "'");
    }
    validate(spec);
    return spec;
}

std::string name_of(const OptimizerSpec& spec) {
    return std::visit(overloaded{
                          [](const STLSQ&) { return std::string("stlsq"); },
                          [](const SR3&) { return std::string("sr3"); },
                          [](const SSR&) { return std::string("ssr"); },
                          [](const FROLS&) { return std::string("frols"); },
                      },
                      spec);
}

}  // namespace sindy
