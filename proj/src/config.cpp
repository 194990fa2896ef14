#include "sindy/config.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "sindy/error.hpp"

namespace sindy::config {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string field(const std::string& where, const std::string& key) {
    return where.empty() ? key : where + "." + key;
}

void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    require_object(j, where);
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items()) {
        if (!ok.count(key)) throw ConfigError(field(where, key) + ": unknown field");
    }
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where, T fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    const std::string name = field(where, key);
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(name + ": expected true or false");
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(name + ": expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
            if (v.is_number_unsigned()) return v.get<T>();
            if (v.get<long long>() < 0) throw ConfigError(name + ": must be non-negative");
        }
    } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(name + ": expected a number");
    } else {
        if (!v.is_string()) throw ConfigError(name + ": expected a string");
    }
    return v.get<T>();
}

template <class F>
auto with_context(const std::string& where, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        if (msg.rfind(where, 0) == 0) throw;
        throw ConfigError(where + ": " + msg);
    }
}

json axis_name(int axis) {
    switch (axis) {
        case kTimeAxis: return "t";
        case 0: return "x";
        case 1: return "y";
        case 2: return "z";
        default: return axis;
    }
}

int axis_from(const json& j, const std::string& where) {
    if (j.is_number_integer()) {
        const int a = j.get<int>();
        if (a < kTimeAxis) throw ConfigError(where + ": axis index must be >= -1");
        return a;
    }
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "t") return kTimeAxis;
        if (s == "x") return 0;
        if (s == "y") return 1;
        if (s == "z") return 2;
    }
    throw ConfigError(where + ": axis must be x, y, z, t or an index");
}

std::vector<int> axes_from(const json& j, const std::string& key, const std::string& where,
                           std::vector<int> fallback) {
    if (!j.contains(key)) return fallback;
    const json& a = j.at(key);
    if (!a.is_array()) throw ConfigError(field(where, key) + ": expected an array");
    std::vector<int> out;
    for (std::size_t i = 0; i < a.size(); ++i) {
        out.push_back(axis_from(a[i], field(where, key) + "[" + std::to_string(i) + "]"));
    }
    return out;
}

json axes_to_json(const std::vector<int>& axes) {
    json out = json::array();
    for (int a : axes) out.push_back(axis_name(a));
    return out;
}

std::vector<int> int_list(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) return {};
    const json& a = j.at(key);
    if (!a.is_array()) throw ConfigError(field(where, key) + ": expected an array");
    std::vector<int> out;
    for (const auto& v : a) {
        if (!v.is_number_integer()) throw ConfigError(field(where, key) + ": expected integers");
        out.push_back(v.get<int>());
    }
    return out;
}

const json& required(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(field(where, key) + ": required field missing");
    return j.at(key);
}

void validate_diff(const DiffMethod& m) {
    validate(m, 1, std::numeric_limits<std::size_t>::max() / 4);
}

bool shorthand_has_seed(const std::string& text) { return text.find("seed=") != std::string::npos; }

}  // namespace

json to_json(const DiffMethod& method) {
    return std::visit(overloaded{
                          [](const FiniteDifference& fd) { return json{{"method", "fd"}, {"order", fd.order}}; },
                          [](const SavitzkyGolay& sg) {
                              return json{{"method", "sg"}, {"window", sg.window}, {"poly_order", sg.poly_order}};
                          },
                          [](const Spectral& sp) {
                              return json{{"method", "spectral"}, {"filter_strength", sp.filter_strength}};
                          },
                      },
                      method);
}

DiffMethod diff_from_json(const json& j, const std::string& where) {
    return with_context(where, [&]() -> DiffMethod {
        DiffMethod m;
        if (j.is_string()) {
            m = parse_diff_method(j.get<std::string>());
        } else {
            require_object(j, where);
            const json& m_j = required(j, "method", where);
            if (!m_j.is_string()) throw ConfigError(field(where, "method") + ": expected a string");
            const auto method = m_j.get<std::string>();
            if (method == "fd") {
                check_keys(j, where, {"method", "order"});
                m = FiniteDifference{get<int>(j, "order", where, 2)};
            } else if (method == "sg") {
                check_keys(j, where, {"method", "window", "poly_order"});
                const SavitzkyGolay d;
                m = SavitzkyGolay{get<int>(j, "window", where, d.window), get<int>(j, "poly_order", where, d.poly_order)};
            } else if (method == "spectral") {
                check_keys(j, where, {"method", "filter_strength"});
                m = Spectral{get<double>(j, "filter_strength", where, 0.0)};
            } else {
                throw ConfigError(field(where, "method") + ": unknown method '" + method + "'");
            }
        }
        validate_diff(m);
        return m;
    });
}

json to_json(const LibrarySpec& spec) {
    return std::visit(
        overloaded{
            [](const PolynomialLibrary& p) {
                return json{{"type", "polynomial"},
                            {"degree", p.degree},
                            {"include_bias", p.include_bias},
                            {"include_interactions", p.include_interactions}};
            },
            [](const FourierLibrary& f) {
                return json{{"type", "fourier"},
                            {"n_frequencies", f.n_frequencies},
                            {"include_sin", f.include_sin},
                            {"include_cos", f.include_cos}};
            },
            [](const CustomLibrary& c) {
                json ids = json::array();
                for (const auto& f : c.functions) {
                    if (f.id.empty()) throw ConfigError("custom functions without an id cannot be serialized");
                    ids.push_back(f.id);
                }
                return json{{"type", "custom"}, {"functions", ids}};
            },
            [](const PDELibrary& p) {
                json j{{"type", "pde"}, {"derivative_order", p.derivative_order}, {"axes", axes_to_json(p.axes)}};
                if (p.multiply_by) j["multiply_by"] = to_json(*p.multiply_by);
                return j;
            },
            [](const WeakPDELibrary& w) {
                json j{{"type", "weak_pde"},
                       {"derivative_order", w.derivative_order},
                       {"axes", axes_to_json(w.axes)},
                       {"n_subdomains", w.n_subdomains},
                       {"test_order", w.test_order},
                       {"time_window", w.time_window},
                       {"space_window", w.space_window},
                       {"seed", w.seed}};
                if (w.functions) j["functions"] = to_json(*w.functions);
                return j;
            },
            [](const ConcatLibrary& c) {
                json parts = json::array();
                for (const auto& p : c.parts) parts.push_back(to_json(*p));
                return json{{"type", "concat"}, {"parts", parts}};
            },
            [](const TensorLibrary& t) {
                return json{{"type", "tensor"}, {"left", to_json(*t.left)}, {"right", to_json(*t.right)}};
            },
            [](const InputSubsetLibrary& s) {
                return json{{"type", "input_subset"}, {"inner", to_json(*s.inner)}, {"inputs", s.inputs}};
            },
        },
        spec.kind);
}

LibraryPtr library_from_json(const json& j, const std::string& where) {
    require_object(j, where);
    const json& type_j = required(j, "type", where);
    if (!type_j.is_string()) throw ConfigError(field(where, "type") + ": expected a string");
    const auto type = type_j.get<std::string>();
    if (type == "polynomial") {
        check_keys(j, where, {"type", "degree", "include_bias", "include_interactions"});
        const PolynomialLibrary d;
        return make_library(PolynomialLibrary{get<int>(j, "degree", where, d.degree),
                                              get<bool>(j, "include_bias", where, d.include_bias),
                                              get<bool>(j, "include_interactions", where, d.include_interactions)});
    }
    if (type == "fourier") {
        check_keys(j, where, {"type", "n_frequencies", "include_sin", "include_cos"});
        const FourierLibrary d;
        return make_library(FourierLibrary{get<int>(j, "n_frequencies", where, d.n_frequencies),
                                           get<bool>(j, "include_sin", where, d.include_sin),
                                           get<bool>(j, "include_cos", where, d.include_cos)});
    }
    if (type == "custom") {
        check_keys(j, where, {"type", "functions"});
        const json& fs = required(j, "functions", where);
        if (!fs.is_array()) throw ConfigError(field(where, "functions") + ": expected an array of names");
        CustomLibrary c;
        for (std::size_t i = 0; i < fs.size(); ++i) {
            const std::string w = field(where, "functions") + "[" + std::to_string(i) + "]";
            if (!fs[i].is_string()) throw ConfigError(w + ": expected a function name");
            c.functions.push_back(with_context(w, [&] { return builtin_function(fs[i].get<std::string>()); }));
        }
        return make_library(std::move(c));
    }
    if (type == "pde") {
        check_keys(j, where, {"type", "derivative_order", "axes", "multiply_by"});
        PDELibrary p;
        p.derivative_order = get<int>(j, "derivative_order", where, p.derivative_order);
        p.axes = axes_from(j, "axes", where, p.axes);
        if (j.contains("multiply_by")) p.multiply_by = library_from_json(j.at("multiply_by"), field(where, "multiply_by"));
        return make_library(std::move(p));
    }
    if (type == "weak_pde") {
        check_keys(j, where, {"type", "derivative_order", "axes", "functions", "n_subdomains", "test_order",
                              "time_window", "space_window", "seed"});
        WeakPDELibrary w;
        w.derivative_order = get<int>(j, "derivative_order", where, w.derivative_order);
        w.axes = axes_from(j, "axes", where, w.axes);
        if (j.contains("functions")) w.functions = library_from_json(j.at("functions"), field(where, "functions"));
        w.n_subdomains = get<int>(j, "n_subdomains", where, w.n_subdomains);
        w.test_order = get<int>(j, "test_order", where, w.test_order);
        w.time_window = get<int>(j, "time_window", where, w.time_window);
        w.space_window = int_list(j, "space_window", where);
        w.seed = get<std::uint64_t>(j, "seed", where, w.seed);
        return make_library(std::move(w));
    }
    if (type == "concat") {
        check_keys(j, where, {"type", "parts"});
        const json& parts = required(j, "parts", where);
        if (!parts.is_array()) throw ConfigError(field(where, "parts") + ": expected an array");
        ConcatLibrary c;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            c.parts.push_back(library_from_json(parts[i], field(where, "parts") + "[" + std::to_string(i) + "]"));
        }
        return make_library(std::move(c));
    }
    if (type == "tensor") {
        check_keys(j, where, {"type", "left", "right"});
        return make_library(TensorLibrary{library_from_json(required(j, "left", where), field(where, "left")),
                                          library_from_json(required(j, "right", where), field(where, "right"))});
    }
    if (type == "input_subset") {
        check_keys(j, where, {"type", "inner", "inputs"});
        return make_library(InputSubsetLibrary{library_from_json(required(j, "inner", where), field(where, "inner")),
                                               int_list(j, "inputs", where)});
    }
    throw ConfigError(field(where, "type") + ": unknown library type '" + type + "'");
}

json to_json(const OptimizerSpec& spec) {
    return std::visit(
        overloaded{
            [](const STLSQ& s) {
                return json{{"method", "stlsq"}, {"threshold", s.threshold}, {"alpha", s.alpha}, {"max_iter", s.max_iter}};
            },
            [](const SR3& s) {
                json j{{"method", "sr3"},
                       {"threshold", s.threshold},
                       {"nu", s.nu},
                       {"regularizer", s.regularizer == Regularizer::l0 ? "l0" : "l1"},
                       {"max_iter", s.max_iter},
                       {"tol", s.tol}};
                if (s.constraints) {
                    json rhs = json::array();
                    for (Eigen::Index i = 0; i < s.constraints->rhs.size(); ++i) rhs.push_back(s.constraints->rhs(i));
                    j["constraints"] = {{"lhs", matrix_to_json(s.constraints->lhs)}, {"rhs", rhs}};
                }
                return j;
            },
            [](const SSR& s) {
                return json{{"method", "ssr"},
                            {"max_terms", s.max_terms},
                            {"selection", s.selection == PathSelection::holdout ? "holdout" : "path"},
                            {"seed", s.seed}};
            },
            [](const FROLS& f) {
                return json{{"method", "frols"}, {"max_terms", f.max_terms}, {"err_tol", f.err_tol}};
            },
        },
        spec);
}

OptimizerSpec optimizer_from_json(const json& j, const std::string& where, std::uint64_t default_seed) {
    return with_context(where, [&]() -> OptimizerSpec {
        OptimizerSpec spec;
        if (j.is_string()) {
            spec = parse_optimizer(j.get<std::string>());
            if (auto* s = std::get_if<SSR>(&spec)) s->seed = default_seed;
            return spec;
        }
        require_object(j, where);
        const json& m = required(j, "method", where);
        if (!m.is_string()) throw ConfigError(field(where, "method") + ": expected a string");
        const auto method = m.get<std::string>();
        if (method == "stlsq") {
            check_keys(j, where, {"method", "threshold", "alpha", "max_iter"});
            const STLSQ d;
            spec = STLSQ{get<double>(j, "threshold", where, d.threshold), get<double>(j, "alpha", where, d.alpha),
                         get<int>(j, "max_iter", where, d.max_iter)};
        } else if (method == "sr3") {
            check_keys(j, where, {"method", "threshold", "nu", "regularizer", "max_iter", "tol", "constraints"});
            SR3 s;
            s.threshold = get<double>(j, "threshold", where, s.threshold);
            s.nu = get<double>(j, "nu", where, s.nu);
            const auto reg = get<std::string>(j, "regularizer", where, "l0");
            if (reg == "l0") s.regularizer = Regularizer::l0;
            else if (reg == "l1") s.regularizer = Regularizer::l1;
            else throw ConfigError(field(where, "regularizer") + ": must be l0 or l1");
            s.max_iter = get<int>(j, "max_iter", where, s.max_iter);
            s.tol = get<double>(j, "tol", where, s.tol);
            if (j.contains("constraints")) {
                const std::string w = field(where, "constraints");
                const json& c = j.at("constraints");
                check_keys(c, w, {"lhs", "rhs"});
                EqualityConstraints ec;
                ec.lhs = matrix_from_json(required(c, "lhs", w), field(w, "lhs"));
                const json& rhs = required(c, "rhs", w);
                if (!rhs.is_array()) throw ConfigError(field(w, "rhs") + ": expected an array");
                ec.rhs.resize(Eigen::Index(rhs.size()));
                for (std::size_t i = 0; i < rhs.size(); ++i) {
                    if (!rhs[i].is_number()) throw ConfigError(field(w, "rhs") + ": expected numbers");
                    ec.rhs(Eigen::Index(i)) = rhs[i].get<double>();
                }
                s.constraints = std::move(ec);
            }
            spec = std::move(s);
        } else if (method == "ssr") {
            check_keys(j, where, {"method", "max_terms", "selection", "seed"});
            SSR s;
            s.max_terms = get<int>(j, "max_terms", where, s.max_terms);
            const auto sel = get<std::string>(j, "selection", where, "holdout");
            if (sel == "holdout") s.selection = PathSelection::holdout;
            else if (sel == "path") s.selection = PathSelection::path;
            else throw ConfigError(field(where, "selection") + ": must be holdout or path");
            s.seed = get<std::uint64_t>(j, "seed", where, default_seed);
            spec = s;
        } else if (method == "frols") {
            check_keys(j, where, {"method", "max_terms", "err_tol"});
            const FROLS d;
            spec = FROLS{get<int>(j, "max_terms", where, d.max_terms), get<double>(j, "err_tol", where, d.err_tol)};
        } else {
            throw ConfigError(field(where, "method") + ": unknown optimizer '" + method + "'");
        }
        validate(spec);
        return spec;
    });
}

json to_json(const EnsembleSpec& spec) {
    return json{{"n_models", spec.n_models},
                {"row_fraction", spec.row_fraction},
                {"replace", spec.replace},
                {"n_library_drop", spec.n_library_drop},
                {"aggregator", spec.aggregator == Aggregator::median ? "median" : "mean"},
                {"inclusion_threshold", spec.inclusion_threshold},
                {"seed", spec.seed}};
}

EnsembleSpec ensemble_from_json(const json& j, const std::string& where, std::uint64_t default_seed) {
    return with_context(where, [&] {
        if (j.is_string()) {
            const auto text = j.get<std::string>();
            EnsembleSpec spec = parse_ensemble(text);
            if (!shorthand_has_seed(text)) spec.seed = default_seed;
            return spec;
        }
        check_keys(j, where, {"n_models", "row_fraction", "replace", "n_library_drop", "aggregator",
                              "inclusion_threshold", "seed"});
        EnsembleSpec spec;
        spec.n_models = get<int>(j, "n_models", where, spec.n_models);
        spec.row_fraction = get<double>(j, "row_fraction", where, spec.row_fraction);
        spec.replace = get<bool>(j, "replace", where, spec.replace);
        spec.n_library_drop = get<int>(j, "n_library_drop", where, spec.n_library_drop);
        const auto agg = get<std::string>(j, "aggregator", where, "median");
        if (agg == "median") spec.aggregator = Aggregator::median;
        else if (agg == "mean") spec.aggregator = Aggregator::mean;
        else throw ConfigError(field(where, "aggregator") + ": must be median or mean");
        spec.inclusion_threshold = get<double>(j, "inclusion_threshold", where, spec.inclusion_threshold);
        spec.seed = get<std::uint64_t>(j, "seed", where, default_seed);
        validate(spec, 0, 0);
        return spec;
    });
}

json to_json(const BenchmarkSpec& spec) {
    json j = std::visit(overloaded{
                            [](const LorenzSpec& l) {
                                return json{{"system", "lorenz"}, {"sigma", l.sigma},   {"rho", l.rho},
                                            {"beta", l.beta},     {"initial", l.initial}, {"t_start", l.t_start},
                                            {"t_end", l.t_end},   {"dt", l.dt}};
                            },
                            [](const KSSpec& k) {
                                return json{{"system", "ks"},        {"length", k.length},   {"n_grid", k.n_grid},
                                            {"dt", k.dt},            {"dt_save", k.dt_save}, {"n_saves", k.n_saves},
                                            {"burn_in", k.burn_in},  {"n_modes", k.n_modes},
                                            {"max_wavenumber", k.max_wavenumber}};
                            },
                        },
                        spec.system);
    j["noise"] = spec.noise;
    j["seed"] = spec.seed;
    return j;
}

BenchmarkSpec benchmark_from_json(const json& j, const std::string& where, std::uint64_t default_seed) {
    require_object(j, where);
    const auto system = get<std::string>(j, "system", where, "");
    BenchmarkSpec spec;
    if (system == "lorenz") {
        check_keys(j, where, {"system", "schema", "sigma", "rho", "beta", "initial", "t_start", "t_end", "dt", "noise", "seed"});
        LorenzSpec l;
        l.sigma = get<double>(j, "sigma", where, l.sigma);
        l.rho = get<double>(j, "rho", where, l.rho);
        l.beta = get<double>(j, "beta", where, l.beta);
        if (j.contains("initial")) {
            const json& ic = j.at("initial");
            if (!ic.is_array() || ic.size() != 3) throw ConfigError(field(where, "initial") + ": expected 3 numbers");
            for (std::size_t i = 0; i < 3; ++i) {
                if (!ic[i].is_number()) throw ConfigError(field(where, "initial") + ": expected 3 numbers");
                l.initial[i] = ic[i].get<double>();
            }
        }
        l.t_start = get<double>(j, "t_start", where, l.t_start);
        l.t_end = get<double>(j, "t_end", where, l.t_end);
        l.dt = get<double>(j, "dt", where, l.dt);
        spec.system = l;
    } else if (system == "ks") {
        check_keys(j, where, {"system", "schema", "length", "n_grid", "dt", "dt_save", "n_saves", "burn_in", "n_modes",
                              "max_wavenumber", "noise", "seed"});
        KSSpec k;
        k.length = get<double>(j, "length", where, k.length);
        k.n_grid = get<int>(j, "n_grid", where, k.n_grid);
        k.dt = get<double>(j, "dt", where, k.dt);
        k.dt_save = get<double>(j, "dt_save", where, k.dt_save);
        k.n_saves = get<int>(j, "n_saves", where, k.n_saves);
        k.burn_in = get<double>(j, "burn_in", where, k.burn_in);
        k.n_modes = get<int>(j, "n_modes", where, k.n_modes);
        k.max_wavenumber = get<int>(j, "max_wavenumber", where, k.max_wavenumber);
        spec.system = k;
    } else {
        throw ConfigError(field(where, "system") + ": must be lorenz or ks");
    }
    spec.noise = get<double>(j, "noise", where, 0.0);
    spec.seed = get<std::uint64_t>(j, "seed", where, default_seed);
    with_context(where, [&] {
        validate(spec);
        return 0;
    });
    return spec;
}

DiscoveryConfig config_from_json(const json& j, std::optional<std::uint64_t> seed_override) {
    check_keys(j, "", {"schema", "data", "allow_missing", "train_fraction", "diff", "spatial_diff", "library",
                       "optimizer", "ensemble", "normalize_columns", "noise", "output", "seed", "precision"});
    const int schema = get<int>(j, "schema", "", kSchema);
    if (schema != kSchema) throw ConfigError("schema: unsupported version " + std::to_string(schema));

    DiscoveryConfig c;
    c.seed = seed_override ? *seed_override : get<std::uint64_t>(j, "seed", "", 0);

    const json& data = required(j, "data", "");
    check_keys(data, "data", {"path", "benchmark"});
    if (data.contains("path") == data.contains("benchmark")) {
        throw ConfigError("data: give exactly one of path or benchmark");
    }
    if (data.contains("path")) c.data_path = get<std::string>(data, "path", "data", "");
    else c.benchmark = benchmark_from_json(data.at("benchmark"), "data.benchmark", c.seed);

    c.allow_missing = get<bool>(j, "allow_missing", "", false);
    c.train_fraction = get<double>(j, "train_fraction", "", c.train_fraction);
    if (!(c.train_fraction > 0.0 && c.train_fraction <= 1.0)) throw ConfigError("train_fraction: must lie in (0, 1]");
    if (j.contains("diff")) c.diff.time = diff_from_json(j.at("diff"), "diff");
    if (j.contains("spatial_diff")) c.diff.space = diff_from_json(j.at("spatial_diff"), "spatial_diff");
    if (j.contains("library")) {
        c.library = library_from_json(j.at("library"), "library");
    } else if (c.benchmark) {
        c.library = canonical_library(*c.benchmark);
    } else {
        c.library = make_library(PolynomialLibrary{});
    }
    if (j.contains("optimizer")) c.optimizer = optimizer_from_json(j.at("optimizer"), "optimizer", c.seed);
    if (j.contains("ensemble") && !j.at("ensemble").is_null()) {
        c.ensemble = ensemble_from_json(j.at("ensemble"), "ensemble", c.seed);
    }
    c.normalize_columns = get<bool>(j, "normalize_columns", "", false);
    if (j.contains("noise")) {
        const json& n = j.at("noise");
        check_keys(n, "noise", {"level", "scale"});
        c.noise.level = get<double>(n, "level", "noise", 0.0);
        if (!(c.noise.level >= 0.0)) throw ConfigError("noise.level: must be >= 0");
        const auto scale = get<std::string>(n, "scale", "noise", "relative");
        if (scale == "relative") c.noise.scale = NoiseScale::relative_rms;
        else if (scale == "absolute") c.noise.scale = NoiseScale::absolute;
        else throw ConfigError("noise.scale: must be relative or absolute");
    }
    c.output = get<std::string>(j, "output", "", "out");
    c.precision = get<int>(j, "precision", "", 3);
    if (c.precision < 1 || c.precision > 17) throw ConfigError("precision: must lie in [1, 17]");
    return c;
}

json to_json(const DiscoveryConfig& c) {
    json j{{"schema", kSchema}};
    if (c.data_path) j["data"] = {{"path", c.data_path->string()}};
    else if (c.benchmark) j["data"] = {{"benchmark", to_json(*c.benchmark)}};
    j["allow_missing"] = c.allow_missing;
    j["train_fraction"] = c.train_fraction;
    j["diff"] = to_json(c.diff.time);
    if (c.diff.space) j["spatial_diff"] = to_json(*c.diff.space);
    if (c.library) j["library"] = to_json(*c.library);
    j["optimizer"] = to_json(c.optimizer);
    if (c.ensemble) j["ensemble"] = to_json(*c.ensemble);
    j["normalize_columns"] = c.normalize_columns;
    j["noise"] = {{"level", c.noise.level}, {"scale", c.noise.scale == NoiseScale::absolute ? "absolute" : "relative"}};
    j["output"] = c.output.string();
    j["seed"] = c.seed;
    j["precision"] = c.precision;
    return j;
}

json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": malformed JSON: " + e.what());
    }
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + ": expected an array of rows");
    if (j.empty()) return Eigen::MatrixXd(0, 0);
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    Eigen::MatrixXd m(Eigen::Index(j.size()), Eigen::Index(cols));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != cols) throw ConfigError(where + ": rows must have equal length");
        for (std::size_t k = 0; k < cols; ++k) {
            if (!j[i][k].is_number()) throw ConfigError(where + ": expected numbers");
            m(Eigen::Index(i), Eigen::Index(k)) = j[i][k].get<double>();
        }
    }
    return m;
}

}  // namespace sindy::config
