#include "sindy/library.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "sindy/error.hpp"

namespace sindy {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

using Vars = std::vector<std::size_t>;

std::string input_name(std::size_t v, const InputLayout& layout) {
    return v < layout.n_states ? "q" + std::to_string(v) : "u" + std::to_string(v - layout.n_states);
}

char axis_letter(int axis) {
    switch (axis) {
        case kTimeAxis: return 't';
        case 0: return 'x';
        case 1: return 'y';
        case 2: return 'z';
        default: throw ConfigError("at most three spatial axes are supported");
    }
}

// Multisets of positions 0..n-1 of size 0..degree, ordered by size and then
// lexicographically.
std::vector<std::vector<std::size_t>> monomials(std::size_t n, int degree, bool bias, bool interactions) {
    std::vector<std::vector<std::size_t>> out;
    if (bias) out.push_back({});
    for (int k = 1; k <= degree; ++k) {
        if (!interactions) {
            for (std::size_t v = 0; v < n; ++v) out.emplace_back(std::size_t(k), v);
            continue;
        }
        std::vector<std::size_t> combo(std::size_t(k), 0);
        while (true) {
            out.push_back(combo);
            // advance to next nondecreasing sequence
            std::size_t i = combo.size();
            while (i > 0 && combo[i - 1] == n - 1) --i;
            if (i == 0) break;
            const std::size_t next = combo[i - 1] + 1;
            for (std::size_t j = i - 1; j < combo.size(); ++j) combo[j] = next;
        }
    }
    return out;
}

std::string monomial_name(const std::vector<std::size_t>& combo, const Vars& vars, const InputLayout& layout) {
    if (combo.empty()) return "1";
    std::string name;
    for (std::size_t i = 0; i < combo.size();) {
        std::size_t j = i;
        while (j < combo.size() && combo[j] == combo[i]) ++j;
        if (!name.empty()) name += ' ';
        name += input_name(vars[combo[i]], layout);
        if (j - i > 1) name += "^" + std::to_string(j - i);
        i = j;
    }
    return name;
}

// Multi-indices over `a` axes with total order 1..D, by total order then with
// earlier axes taking the larger share first.
std::vector<std::vector<int>> multi_indices(std::size_t a, int D) {
    std::vector<std::vector<int>> out;
    if (a == 0) return out;
    std::vector<int> alpha(a, 0);
    std::function<void(std::size_t, int)> rec = [&](std::size_t pos, int remaining) {
        if (pos + 1 == a) {
            alpha[pos] = remaining;
            out.push_back(alpha);
            return;
        }
        for (int k = remaining; k >= 0; --k) {
            alpha[pos] = k;
            rec(pos + 1, remaining - k);
        }
    };
    for (int total = 1; total <= D; ++total) rec(0, total);
    return out;
}

std::string derivative_suffix(const std::vector<int>& axes, const std::vector<int>& alpha) {
    std::string s;
    for (std::size_t i = 0; i < axes.size(); ++i) s.append(std::size_t(alpha[i]), axis_letter(axes[i]));
    return s;
}

Vars state_vars(const Vars& vars, const InputLayout& layout) {
    Vars out;
    for (auto v : vars) {
        if (v < layout.n_states) out.push_back(v);
    }
    return out;
}

bool is_plain_state(const std::string& name, const Vars& states, const InputLayout& layout) {
    return std::any_of(states.begin(), states.end(),
                       [&](std::size_t j) { return name == input_name(j, layout); });
}

std::vector<std::string> names_impl(const LibrarySpec& spec, const InputLayout& layout, const Vars& vars);

std::vector<std::string> names_impl(const LibrarySpec& spec, const InputLayout& layout, const Vars& vars) {
    return std::visit(
        overloaded{
            [&](const PolynomialLibrary& p) {
                std::vector<std::string> names;
                for (const auto& c : monomials(vars.size(), p.degree, p.include_bias, p.include_interactions)) {
                    names.push_back(monomial_name(c, vars, layout));
                }
                return names;
            },
            [&](const FourierLibrary& f) {
                std::vector<std::string> names;
                for (int k = 1; k <= f.n_frequencies; ++k) {
                    for (auto v : vars) {
                        const std::string arg = std::to_string(k) + " " + input_name(v, layout);
                        if (f.include_sin) names.push_back("sin(" + arg + ")");
                        if (f.include_cos) names.push_back("cos(" + arg + ")");
                    }
                }
                return names;
            },
            [&](const CustomLibrary& c) {
                std::vector<std::string> names;
                for (const auto& fn : c.functions) {
                    for (auto v : vars) {
                        std::string name = fn.name_format;
                        const auto pos = name.find("{}");
                        if (pos != std::string::npos) name.replace(pos, 2, input_name(v, layout));
                        names.push_back(name);
                    }
                }
                return names;
            },
            [&](const PDELibrary& p) {
                std::vector<std::string> factors;
                if (p.multiply_by) factors = names_impl(*p.multiply_by, layout, vars);
                std::vector<std::string> derivs;
                const auto alphas = multi_indices(p.axes.size(), p.derivative_order);
                for (auto j : state_vars(vars, layout)) {
                    for (const auto& alpha : alphas) {
                        derivs.push_back(input_name(j, layout) + "_" + derivative_suffix(p.axes, alpha));
                    }
                }
                std::vector<std::string> names = factors;
                names.insert(names.end(), derivs.begin(), derivs.end());
                for (const auto& f : factors) {
                    if (f == "1") continue;
                    for (const auto& d : derivs) names.push_back(f + " " + d);
                }
                return names;
            },
            [&](const WeakPDELibrary& w) {
                std::vector<std::string> factors;
                if (w.functions) factors = names_impl(*w.functions, layout, vars);
                const auto alphas = multi_indices(w.axes.size(), w.derivative_order);
                const auto states = state_vars(vars, layout);
                std::vector<std::string> names = factors;
                for (auto j : states) {
                    for (const auto& alpha : alphas) {
                        names.push_back(input_name(j, layout) + "_" + derivative_suffix(w.axes, alpha));
                    }
                }
                for (const auto& g : factors) {
                    if (g == "1" || is_plain_state(g, states, layout)) continue;
                    for (const auto& alpha : alphas) names.push_back("(" + g + ")_" + derivative_suffix(w.axes, alpha));
                }
                return names;
            },
            [&](const ConcatLibrary& c) {
                std::vector<std::string> names;
                for (const auto& part : c.parts) {
                    auto sub = names_impl(*part, layout, vars);
                    names.insert(names.end(), sub.begin(), sub.end());
                }
                return names;
            },
            [&](const TensorLibrary& t) {
                const auto left = names_impl(*t.left, layout, vars);
                const auto right = names_impl(*t.right, layout, vars);
                std::vector<std::string> names;
                for (const auto& a : left) {
                    for (const auto& b : right) names.push_back(a + " " + b);
                }
                return names;
            },
            [&](const InputSubsetLibrary& s) {
                Vars sub;
                for (int i : s.inputs) sub.push_back(std::size_t(i));
                return names_impl(*s.inner, layout, sub);
            },
        },
        spec.kind);
}

Vars all_vars(const InputLayout& layout) {
    Vars v(layout.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
    return v;
}

void validate_impl(const LibrarySpec& spec, const InputLayout& layout, const Vars& vars, bool top) {
    std::visit(
        overloaded{
            [&](const PolynomialLibrary& p) {
                if (p.degree < 0) throw ConfigError("polynomial degree must be >= 0");
                if (p.degree == 0 && !p.include_bias) throw ConfigError("polynomial library of degree 0 without bias is empty");
            },
            [&](const FourierLibrary& f) {
                if (f.n_frequencies < 1) throw ConfigError("fourier n_frequencies must be >= 1");
                if (!f.include_sin && !f.include_cos) throw ConfigError("fourier library needs sin or cos");
            },
            [&](const CustomLibrary& c) {
                if (c.functions.empty()) throw ConfigError("custom library has no functions");
                for (const auto& fn : c.functions) {
                    if (!fn.fn) throw ConfigError("custom function '" + fn.id + "' has no callable");
                }
            },
            [&](const PDELibrary& p) {
                if (p.derivative_order < 1) throw ConfigError("pde derivative_order must be >= 1");
                if (p.axes.empty()) throw ConfigError("pde library needs at least one axis");
                std::set<int> seen;
                for (int a : p.axes) {
                    axis_letter(a);
                    if (a < kTimeAxis) throw ConfigError("invalid pde axis");
                    if (!seen.insert(a).second) throw ConfigError("pde axes repeat");
                }
                if (p.multiply_by) validate_impl(*p.multiply_by, layout, vars, false);
            },
            [&](const WeakPDELibrary& w) {
                if (!top) throw ConfigError("weak library must be the outermost library");
                if (w.derivative_order < 0) throw ConfigError("weak derivative_order must be >= 0");
                if (w.derivative_order > 0 && w.axes.empty()) throw ConfigError("weak derivatives need spatial axes");
                for (int a : w.axes) {
                    if (a < 0) throw ConfigError("weak library axes must be spatial");
                    axis_letter(a);
                }
                if (w.n_subdomains < 1) throw ConfigError("weak n_subdomains must be >= 1");
                if (w.test_order < std::max(2, w.derivative_order)) {
                    throw ConfigError("weak test_order must be >= max(2, derivative_order)");
                }
                if (w.time_window < 3) throw ConfigError("weak subdomain needs >= 3 grid points per axis");
                for (int s : w.space_window) {
                    if (s < 3) throw ConfigError("weak subdomain needs >= 3 grid points per axis");
                }
                if (w.functions) validate_impl(*w.functions, layout, vars, false);
            },
            [&](const ConcatLibrary& c) {
                if (c.parts.empty()) throw ConfigError("concat library has no parts");
                for (const auto& part : c.parts) {
                    if (!part) throw ConfigError("concat part is null");
                    validate_impl(*part, layout, vars, false);
                }
            },
            [&](const TensorLibrary& t) {
                if (!t.left || !t.right) throw ConfigError("tensor library needs two factors");
                validate_impl(*t.left, layout, vars, false);
                validate_impl(*t.right, layout, vars, false);
            },
            [&](const InputSubsetLibrary& s) {
                if (!s.inner) throw ConfigError("input subset has no inner library");
                if (s.inputs.empty()) throw ConfigError("input subset selects no inputs");
                Vars sub;
                for (int i : s.inputs) {
                    if (i < 0 || std::find(vars.begin(), vars.end(), std::size_t(i)) == vars.end()) {
                        throw ConfigError("input subset index " + std::to_string(i) + " is not an available input");
                    }
                    if (std::find(sub.begin(), sub.end(), std::size_t(i)) != sub.end()) {
                        throw ConfigError("input subset repeats index " + std::to_string(i));
                    }
                    sub.push_back(std::size_t(i));
                }
                validate_impl(*s.inner, layout, sub, false);
            },
        },
        spec.kind);
}

// ---------------------------------------------------------------------------
// Evaluation

struct Block {
    Eigen::MatrixXd values;
    std::vector<std::string> names;
};

struct Context {
    const Dataset* dataset = nullptr;
    Eigen::MatrixXd inputs;  // m x (n + r)
    InputLayout layout;
    const DiffMethod* diff = nullptr;
    const DiffMethod* time_diff = nullptr;
    Execution exec = Execution::parallel;
    // derivative order per axis (time first, then spatial) -> m x n field, row-major
    std::map<std::vector<int>, std::vector<double>> derivative_cache;
};

const std::vector<double>& derivative_field(Context& ctx, const std::vector<int>& axes,
                                            const std::vector<int>& alpha) {
    if (!ctx.dataset) throw ConfigError("derivative features need a gridded dataset");
    const Grid& grid = ctx.dataset->grid();
    std::vector<int> key(grid.spatial.size() + 1, 0);
    for (std::size_t i = 0; i < axes.size(); ++i) {
        if (axes[i] != kTimeAxis && std::size_t(axes[i]) >= grid.spatial.size()) {
            throw ConfigError("dataset has no spatial axis " + std::to_string(axes[i]));
        }
        key[axes[i] == kTimeAxis ? 0 : std::size_t(axes[i]) + 1] = alpha[i];
    }
    if (auto it = ctx.derivative_cache.find(key); it != ctx.derivative_cache.end()) return it->second;

    const Dataset& ds = *ctx.dataset;
    std::vector<double> field;
    const bool first_time_only =
        key[0] == 1 && std::all_of(key.begin() + 1, key.end(), [](int k) { return k == 0; });
    if (first_time_only) {
        field = differentiate_dataset(ds, *ctx.time_diff, kTimeAxis, 1, ctx.exec);
    } else {
        field = ds.states();
        for (std::size_t a = 0; a < key.size(); ++a) {
            if (key[a] == 0) continue;
            const int axis = a == 0 ? kTimeAxis : int(a) - 1;
            const DiffMethod& method = axis == kTimeAxis ? *ctx.time_diff : *ctx.diff;
            field = differentiate_field(grid, field, ds.n_states(), method, axis, key[a], ctx.exec);
        }
    }
    return ctx.derivative_cache.emplace(key, std::move(field)).first->second;
}

Block eval_impl(const LibrarySpec& spec, Context& ctx, const Vars& vars);

Block eval_impl(const LibrarySpec& spec, Context& ctx, const Vars& vars) {
    const Eigen::Index m = ctx.inputs.rows();
    const bool parallel = ctx.exec == Execution::parallel;
    Block block;
    block.names = names_impl(spec, ctx.layout, vars);
    std::visit(
        overloaded{
            [&](const PolynomialLibrary& p) {
                const auto combos = monomials(vars.size(), p.degree, p.include_bias, p.include_interactions);
                block.values.resize(m, Eigen::Index(combos.size()));
#pragma omp parallel for schedule(static) if (parallel)
                for (std::ptrdiff_t c = 0; c < std::ptrdiff_t(combos.size()); ++c) {
                    auto col = block.values.col(c);
                    col.setOnes();
                    for (auto pos : combos[std::size_t(c)]) col.array() *= ctx.inputs.col(Eigen::Index(vars[pos])).array();
                }
            },
            [&](const FourierLibrary& f) {
                block.values.resize(m, Eigen::Index(block.names.size()));
                Eigen::Index c = 0;
                for (int k = 1; k <= f.n_frequencies; ++k) {
                    for (auto v : vars) {
                        const auto arg = (double(k) * ctx.inputs.col(Eigen::Index(v))).array();
                        if (f.include_sin) block.values.col(c++) = arg.sin();
                        if (f.include_cos) block.values.col(c++) = arg.cos();
                    }
                }
            },
            [&](const CustomLibrary& cl) {
                block.values.resize(m, Eigen::Index(block.names.size()));
                Eigen::Index c = 0;
                for (const auto& fn : cl.functions) {
                    for (auto v : vars) {
                        block.values.col(c++) = ctx.inputs.col(Eigen::Index(v)).unaryExpr(fn.fn);
                    }
                }
            },
            [&](const PDELibrary& p) {
                Block factors;
                if (p.multiply_by) factors = eval_impl(*p.multiply_by, ctx, vars);
                const auto alphas = multi_indices(p.axes.size(), p.derivative_order);
                const auto states = state_vars(vars, ctx.layout);
                const std::size_t n = ctx.layout.n_states;
                Eigen::MatrixXd derivs(m, Eigen::Index(states.size() * alphas.size()));
                Eigen::Index c = 0;
                for (auto j : states) {
                    for (const auto& alpha : alphas) {
                        const auto& field = derivative_field(ctx, p.axes, alpha);
                        derivs.col(c++) = Eigen::Map<const Eigen::VectorXd, 0, Eigen::InnerStride<>>(
                            field.data() + j, m, Eigen::InnerStride<>(Eigen::Index(n)));
                    }
                }
                std::vector<Eigen::Index> nonconstant;
                for (std::size_t f = 0; f < factors.names.size(); ++f) {
                    if (factors.names[f] != "1") nonconstant.push_back(Eigen::Index(f));
                }
                const Eigen::Index nf = Eigen::Index(factors.names.size());
                const Eigen::Index nd = derivs.cols();
                block.values.resize(m, nf + nd + Eigen::Index(nonconstant.size()) * nd);
                if (nf > 0) block.values.leftCols(nf) = factors.values;
                block.values.middleCols(nf, nd) = derivs;
#pragma omp parallel for schedule(static) if (parallel)
                for (std::ptrdiff_t f = 0; f < std::ptrdiff_t(nonconstant.size()); ++f) {
                    for (Eigen::Index d = 0; d < nd; ++d) {
                        block.values.col(nf + nd + Eigen::Index(f) * nd + d) =
                            factors.values.col(nonconstant[std::size_t(f)]).cwiseProduct(derivs.col(d));
                    }
                }
            },
            [&](const WeakPDELibrary&) { throw ConfigError("weak library must be the outermost library"); },
            [&](const ConcatLibrary& cl) {
                std::vector<Block> parts;
                Eigen::Index width = 0;
                for (const auto& part : cl.parts) {
                    parts.push_back(eval_impl(*part, ctx, vars));
                    width += parts.back().values.cols();
                }
                block.values.resize(m, width);
                Eigen::Index c = 0;
                for (const auto& part : parts) {
                    block.values.middleCols(c, part.values.cols()) = part.values;
                    c += part.values.cols();
                }
            },
            [&](const TensorLibrary& t) {
                const Block left = eval_impl(*t.left, ctx, vars);
                const Block right = eval_impl(*t.right, ctx, vars);
                const Eigen::Index a = left.values.cols(), b = right.values.cols();
                block.values.resize(m, a * b);
#pragma omp parallel for schedule(static) if (parallel)
                for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(a); ++i) {
                    for (Eigen::Index j = 0; j < b; ++j) {
                        block.values.col(Eigen::Index(i) * b + j) = left.values.col(i).cwiseProduct(right.values.col(j));
                    }
                }
            },
            [&](const InputSubsetLibrary& s) {
                Vars sub;
                for (int i : s.inputs) sub.push_back(std::size_t(i));
                block.values = eval_impl(*s.inner, ctx, sub).values;
            },
        },
        spec.kind);
    return block;
}

// ---------------------------------------------------------------------------
// Weak form

std::vector<double> test_polynomial_derivative(int p, int k) {
    // coefficients of (1 - z^2)^p in increasing powers, differentiated k times
    std::vector<double> c(std::size_t(2 * p + 1), 0.0);
    double binom = 1.0;
    for (int j = 0; j <= p; ++j) {
        c[std::size_t(2 * j)] = (j % 2 == 0 ? 1.0 : -1.0) * binom;
        binom = binom * double(p - j) / double(j + 1);
    }
    for (int r = 0; r < k; ++r) {
        if (c.size() <= 1) return {0.0};
        std::vector<double> next(c.size() - 1);
        for (std::size_t i = 1; i < c.size(); ++i) next[i - 1] = c[i] * double(i);
        c = std::move(next);
    }
    return c;
}

double horner(const std::vector<double>& c, double z) {
    double acc = 0.0;
    for (std::size_t i = c.size(); i-- > 0;) acc = acc * z + c[i];
    return acc;
}

std::vector<double> trapezoid_weights(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<double> w(n);
    w[0] = 0.5 * (x[1] - x[0]);
    w[n - 1] = 0.5 * (x[n - 1] - x[n - 2]);
    for (std::size_t i = 1; i + 1 < n; ++i) w[i] = 0.5 * (x[i + 1] - x[i - 1]);
    return w;
}

struct Subdomain {
    std::vector<std::size_t> space_start;
    std::size_t time_start = 0;
};

FeatureMatrix evaluate_weak(const WeakPDELibrary& w, const Dataset& ds, Context& ctx) {
    const Grid& grid = ds.grid();
    const std::size_t n_space = grid.spatial.size();
    const std::size_t n = ds.n_states();
    const std::size_t T = grid.time_points();
    if (w.space_window.size() != n_space) {
        throw ConfigError("weak space_window needs one entry per spatial axis (" + std::to_string(n_space) + ")");
    }
    for (int a : w.axes) {
        if (std::size_t(a) >= n_space) throw ConfigError("dataset has no spatial axis " + std::to_string(a));
    }
    if (std::size_t(w.time_window) > T) throw ConfigError("weak time_window exceeds the time axis");
    for (std::size_t a = 0; a < n_space; ++a) {
        if (std::size_t(w.space_window[a]) > grid.spatial[a].size()) {
            throw ConfigError("weak space_window exceeds spatial axis " + std::to_string(a));
        }
    }

    const Vars vars = all_vars(ctx.layout);
    const Vars states = state_vars(vars, ctx.layout);
    Block factors;
    if (w.functions) factors = eval_impl(*w.functions, ctx, vars);
    const auto q = ds.state_matrix();

    // Columns: (field column, spatial order per axis). Field columns index the
    // factor block first, then the states.
    struct Term {
        bool from_state;
        Eigen::Index column;
        std::vector<int> order;  // per spatial axis
    };
    const auto alphas = multi_indices(w.axes.size(), w.derivative_order);
    auto expand = [&](const std::vector<int>& alpha) {
        std::vector<int> order(n_space, 0);
        for (std::size_t i = 0; i < w.axes.size(); ++i) order[std::size_t(w.axes[i])] = alpha[i];
        return order;
    };
    std::vector<Term> terms;
    for (std::size_t f = 0; f < factors.names.size(); ++f) {
        terms.push_back({false, Eigen::Index(f), std::vector<int>(n_space, 0)});
    }
    for (auto j : states) {
        for (const auto& alpha : alphas) terms.push_back({true, Eigen::Index(j), expand(alpha)});
    }
    for (std::size_t f = 0; f < factors.names.size(); ++f) {
        const auto& g = factors.names[f];
        if (g == "1" || is_plain_state(g, states, ctx.layout)) continue;
        for (const auto& alpha : alphas) terms.push_back({false, Eigen::Index(f), expand(alpha)});
    }

    // Distinct derivative orders share one weight tensor per subdomain.
    std::vector<std::vector<int>> orders;
    std::vector<std::size_t> term_order(terms.size());
    for (std::size_t t = 0; t < terms.size(); ++t) {
        auto it = std::find(orders.begin(), orders.end(), terms[t].order);
        if (it == orders.end()) {
            orders.push_back(terms[t].order);
            it = orders.end() - 1;
        }
        term_order[t] = std::size_t(it - orders.begin());
    }

    std::mt19937_64 rng(w.seed);
    std::vector<Subdomain> subdomains(std::size_t(w.n_subdomains));
    for (auto& s : subdomains) {
        for (std::size_t a = 0; a < n_space; ++a) {
            std::uniform_int_distribution<std::size_t> pick(0, grid.spatial[a].size() - std::size_t(w.space_window[a]));
            s.space_start.push_back(pick(rng));
        }
        std::uniform_int_distribution<std::size_t> pick_t(0, T - std::size_t(w.time_window));
        s.time_start = pick_t(rng);
    }

    std::size_t box_space = 1;
    for (int s : w.space_window) box_space *= std::size_t(s);
    const std::size_t wt = std::size_t(w.time_window);

    FeatureMatrix out;
    out.names = names_impl(LibrarySpec{w}, ctx.layout, vars);
    out.values.resize(Eigen::Index(subdomains.size()), Eigen::Index(terms.size()));
    out.weak_lhs = Eigen::MatrixXd(Eigen::Index(subdomains.size()), Eigen::Index(n));
    const bool parallel = ctx.exec == Execution::parallel;

#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::ptrdiff_t k = 0; k < std::ptrdiff_t(subdomains.size()); ++k) {
        const Subdomain& sd = subdomains[std::size_t(k)];
        // 1D factors: space_factor[a][order][i], time_factor[order][i]
        std::vector<std::vector<std::vector<double>>> space_factor(n_space);
        for (std::size_t a = 0; a < n_space; ++a) {
            const auto& x = grid.spatial[a].values;
            const std::span<const double> coords(x.data() + sd.space_start[a], std::size_t(w.space_window[a]));
            int max_order = 0;
            for (const auto& o : orders) max_order = std::max(max_order, o[a]);
            for (int r = 0; r <= max_order; ++r) space_factor[a].push_back(weak_test_weights(coords, w.test_order, r));
        }
        const std::span<const double> tcoords(grid.time.values.data() + sd.time_start, wt);
        const auto time0 = weak_test_weights(tcoords, w.test_order, 0);
        const auto time1 = weak_test_weights(tcoords, w.test_order, 1);

        // Global row of every box point, spatial lexicographic then time.
        std::vector<std::size_t> rows(box_space * wt);
        std::vector<std::size_t> idx(n_space, 0);
        for (std::size_t b = 0; b < box_space; ++b) {
            std::size_t s = 0;
            for (std::size_t a = 0; a < n_space; ++a) s = s * grid.spatial[a].size() + sd.space_start[a] + idx[a];
            for (std::size_t t = 0; t < wt; ++t) rows[b * wt + t] = s * T + sd.time_start + t;
            for (std::size_t a = n_space; a-- > 0;) {
                if (++idx[a] < std::size_t(w.space_window[a])) break;
                idx[a] = 0;
            }
        }
        auto spatial_weights = [&](const std::vector<int>& order) {
            std::vector<double> sw(box_space, 1.0);
            std::vector<std::size_t> id(n_space, 0);
            for (std::size_t b = 0; b < box_space; ++b) {
                for (std::size_t a = 0; a < n_space; ++a) sw[b] *= space_factor[a][std::size_t(order[a])][id[a]];
                for (std::size_t a = n_space; a-- > 0;) {
                    if (++id[a] < std::size_t(w.space_window[a])) break;
                    id[a] = 0;
                }
            }
            return sw;
        };

        std::vector<std::vector<double>> weights;
        for (const auto& order : orders) {
            const auto sw = spatial_weights(order);
            std::vector<double> wgt(box_space * wt);
            for (std::size_t b = 0; b < box_space; ++b) {
                for (std::size_t t = 0; t < wt; ++t) wgt[b * wt + t] = sw[b] * time0[t];
            }
            weights.push_back(std::move(wgt));
        }
        for (std::size_t t = 0; t < terms.size(); ++t) {
            const auto& term = terms[t];
            const auto& wgt = weights[term_order[t]];
            int total = 0;
            for (int o : term.order) total += o;
            double acc = 0.0;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const auto row = Eigen::Index(rows[i]);
                const double v = term.from_state ? q(row, term.column) : factors.values(row, term.column);
                acc += wgt[i] * v;
            }
            out.values(Eigen::Index(k), Eigen::Index(t)) = (total % 2 == 0 ? acc : -acc);
        }
        const auto sw0 = spatial_weights(std::vector<int>(n_space, 0));
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t b = 0; b < box_space; ++b) {
                for (std::size_t t = 0; t < wt; ++t) acc += sw0[b] * time1[t] * q(Eigen::Index(rows[b * wt + t]), Eigen::Index(j));
            }
            (*out.weak_lhs)(Eigen::Index(k), Eigen::Index(j)) = -acc;
        }
    }
    return out;
}

Context make_context(const Dataset& dataset, const DiffMethod& diff, const DiffMethod& time_diff, Execution exec) {
    Context ctx;
    ctx.dataset = &dataset;
    ctx.layout = {dataset.n_states(), dataset.n_controls()};
    ctx.diff = &diff;
    ctx.time_diff = &time_diff;
    ctx.exec = exec;
    const auto m = Eigen::Index(dataset.sample_count());
    ctx.inputs.resize(m, Eigen::Index(ctx.layout.size()));
    ctx.inputs.leftCols(Eigen::Index(dataset.n_states())) = dataset.state_matrix();
    if (auto u = dataset.control_matrix()) ctx.inputs.rightCols(Eigen::Index(dataset.n_controls())) = *u;
    return ctx;
}

void check_unique(const std::vector<std::string>& names) {
    std::set<std::string> seen;
    for (const auto& n : names) {
        if (!seen.insert(n).second) throw ConfigError("library produces duplicate feature name '" + n + "'");
    }
}

bool any_kind(const LibrarySpec& spec, const std::function<bool(const LibrarySpec&)>& pred) {
    if (pred(spec)) return true;
    return std::visit(overloaded{
                          [&](const PDELibrary& p) { return p.multiply_by && any_kind(*p.multiply_by, pred); },
                          [&](const WeakPDELibrary& w) { return w.functions && any_kind(*w.functions, pred); },
                          [&](const ConcatLibrary& c) {
                              return std::any_of(c.parts.begin(), c.parts.end(),
                                                 [&](const LibraryPtr& p) { return any_kind(*p, pred); });
                          },
                          [&](const TensorLibrary& t) { return any_kind(*t.left, pred) || any_kind(*t.right, pred); },
                          [&](const InputSubsetLibrary& s) { return any_kind(*s.inner, pred); },
                          [](const auto&) { return false; },
                      },
                      spec.kind);
}

}  // namespace

CustomFunction builtin_function(const std::string& id) {
    static const std::map<std::string, std::pair<std::string, double (*)(double)>> table = {
        {"exp", {"exp({})", [](double x) { return std::exp(x); }}},
        {"sin", {"sin({})", [](double x) { return std::sin(x); }}},
        {"cos", {"cos({})", [](double x) { return std::cos(x); }}},
        {"tanh", {"tanh({})", [](double x) { return std::tanh(x); }}},
        {"abs", {"|{}|", [](double x) { return std::abs(x); }}},
        {"inv", {"1/{}", [](double x) { return 1.0 / x; }}},
        {"square", {"{}^2", [](double x) { return x * x; }}},
        {"cube", {"{}^3", [](double x) { return x * x * x; }}},
        {"sqrt", {"sqrt({})", [](double x) { return std::sqrt(x); }}},
        {"log", {"log({})", [](double x) { return std::log(x); }}},
    };
    const auto it = table.find(id);
    if (it == table.end()) throw ConfigError("unknown custom function '" + id + "'");
    return {id, it->second.first, it->second.second};
}

std::vector<std::string> feature_names(const LibrarySpec& spec, InputLayout layout) {
    return names_impl(spec, layout, all_vars(layout));
}

std::size_t predict_width(const LibrarySpec& spec, InputLayout layout) {
    return feature_names(spec, layout).size();
}

void validate(const LibrarySpec& spec, InputLayout layout) {
    validate_impl(spec, layout, all_vars(layout), true);
    check_unique(feature_names(spec, layout));
}

bool is_weak(const LibrarySpec& spec) { return std::holds_alternative<WeakPDELibrary>(spec.kind); }

bool has_derivative_terms(const LibrarySpec& spec) {
    return any_kind(spec, [](const LibrarySpec& s) {
        return std::holds_alternative<PDELibrary>(s.kind) || std::holds_alternative<WeakPDELibrary>(s.kind);
    });
}

FeatureMatrix evaluate(const LibrarySpec& spec, const Dataset& dataset, const DiffMethod& diff, Execution exec) {
    return evaluate(spec, dataset, diff, diff, exec);
}

FeatureMatrix evaluate(const LibrarySpec& spec, const Dataset& dataset, const DiffMethod& space_diff,
                       const DiffMethod& time_diff, Execution exec) {
    const InputLayout layout{dataset.n_states(), dataset.n_controls()};
    validate(spec, layout);
    Context ctx = make_context(dataset, space_diff, time_diff, exec);
    if (const auto* w = std::get_if<WeakPDELibrary>(&spec.kind)) return evaluate_weak(*w, dataset, ctx);
    Block block = eval_impl(spec, ctx, all_vars(layout));
    if (!dataset.allow_missing() && !block.values.allFinite()) {
        throw DataError("library evaluation produced non-finite values");
    }
    return {std::move(block.values), std::move(block.names), std::nullopt};
}

Eigen::VectorXd evaluate_pointwise(const LibrarySpec& spec, std::span<const double> state,
                                   std::span<const double> control) {
    if (has_derivative_terms(spec)) throw ConfigError("pointwise evaluation is undefined for derivative libraries");
    const InputLayout layout{state.size(), control.size()};
    validate_impl(spec, layout, all_vars(layout), true);
    Context ctx;
    ctx.layout = layout;
    ctx.exec = Execution::serial;
    ctx.inputs.resize(1, Eigen::Index(layout.size()));
    for (std::size_t i = 0; i < state.size(); ++i) ctx.inputs(0, Eigen::Index(i)) = state[i];
    for (std::size_t i = 0; i < control.size(); ++i) ctx.inputs(0, Eigen::Index(state.size() + i)) = control[i];
    return eval_impl(spec, ctx, all_vars(layout)).values.row(0).transpose();
}

std::vector<double> weak_test_weights(std::span<const double> coords, int p, int k) {
    const std::size_t n = coords.size();
    if (n < 3) throw ConfigError("weak subdomain needs >= 3 grid points per axis");
    const double lo = coords.front(), hi = coords.back();
    const double scale = 2.0 / (hi - lo);
    const auto poly0 = test_polynomial_derivative(p, 0);
    const auto polyk = test_polynomial_derivative(p, k);
    const auto quad = trapezoid_weights(coords);
    std::vector<double> base(n), deriv(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = (2.0 * coords[i] - lo - hi) / (hi - lo);
        base[i] = horner(poly0, z);
        deriv[i] = horner(polyk, z) * std::pow(scale, k);
    }
    if (k >= 1) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            num += quad[i] * deriv[i];
            den += quad[i] * base[i];
        }
        const double c = num / den;
        for (std::size_t i = 0; i < n; ++i) deriv[i] -= c * base[i];
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = quad[i] * deriv[i];
    return out;
}

}  // namespace sindy
