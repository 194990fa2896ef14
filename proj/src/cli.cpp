#include "sindy/cli.hpp"

#include <charconv>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sindy/error.hpp"
#include "sindy/io.hpp"
#include "sindy/random.hpp"
#include "sindy/systems.hpp"

namespace sindy::cli {

namespace fs = std::filesystem;
using config::json;

namespace {

std::string shortest(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

json diagnostics_json(const Diagnostics& d, std::size_t dropped_rows) {
    return json{{"converged", d.converged},
                {"iterations", d.iterations},
                {"rank_deficient", d.rank_deficient},
                {"empty_support", d.empty_support},
                {"dropped_columns", d.dropped_columns},
                {"dropped_rows", dropped_rows},
                {"warnings", d.warnings}};
}

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string prediction_table(const FittedModel& model, const Dataset& data) {
    const Eigen::MatrixXd pred = predict(model, data);
    const Eigen::MatrixXd truth = computed_targets(model, data);
    std::ostringstream out;
    out << "sample";
    for (const auto& t : model.target_names) out << "," << t << "_predicted," << t << "_computed";
    out << "\n";
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
        out << i;
        for (Eigen::Index t = 0; t < pred.cols(); ++t) out << "," << shortest(pred(i, t)) << "," << shortest(truth(i, t));
        out << "\n";
    }
    return out.str();
}

void log_line(std::ostream* log, const std::string& text) {
    if (log) *log << text << "\n";
}

template <class F>
int guarded(std::ostream& err, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return kDataError;
    } catch (const FitError& e) {
        err << "fit error: " << e.what() << "\n";
        return kFitError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUnexpected;
    }
}

std::string joined(const std::vector<std::string>& lines) {
    std::string s;
    for (const auto& l : lines) s += l + "\n";
    return s;
}

}  // namespace

Dataset load_data(const config::DiscoveryConfig& cfg) {
    Dataset data;
    if (cfg.benchmark) {
        data = generate(*cfg.benchmark).data;
    } else {
        data = io::read_dataset(*cfg.data_path, cfg.allow_missing);
    }
    if (cfg.noise.level > 0.0) data = add_noise(data, cfg.noise.level, derive_seed(cfg.seed, 2), cfg.noise.scale);
    return data;
}

FitOutputs run_fit(const config::DiscoveryConfig& cfg, std::ostream* log) {
    if (cfg.benchmark) {
        const std::size_t n = std::holds_alternative<LorenzSpec>(cfg.benchmark->system) ? 3 : 1;
        validate(*cfg.library, InputLayout{n, 0});
    }
    log_line(log, cfg.benchmark ? "generating benchmark data" : "reading " + cfg.data_path->string());
    const Dataset data = load_data(cfg);
    validate(*cfg.library, InputLayout{data.n_states(), data.n_controls()});

    std::optional<Dataset> test;
    Dataset train = data;
    if (cfg.train_fraction < 1.0) {
        auto parts = split_train_test(data, cfg.train_fraction);
        train = std::move(parts.first);
        test = std::move(parts.second);
    }
    log_line(log, "fitting on " + std::to_string(train.grid().time_points()) + " time samples");

    FitOptions options;
    options.normalize = cfg.normalize_columns;
    const FittedModel model = fit(train, cfg.library, cfg.diff, cfg.optimizer, cfg.ensemble, options);
    const std::size_t dropped_rows = assemble(train, *cfg.library, cfg.diff).dropped_rows;

    const double train_r2 = score(model, train, Metric::r2);
    const double train_rmse = score(model, train, Metric::rmse);
    std::optional<double> test_r2, test_rmse;
    if (test) {
        test_r2 = score(model, *test, Metric::r2);
        test_rmse = score(model, *test, Metric::rmse);
    }

    FitOutputs out;
    out.equations = equations(model, cfg.precision);
    for (const auto& e : out.equations) log_line(log, e);

    json model_j{{"library", config::to_json(*model.library)},
                 {"diff", config::to_json(model.diff.time)},
                 {"spatial_diff", config::to_json(model.diff.spatial())},
                 {"optimizer", config::to_json(model.optimizer)},
                 {"normalize_columns", cfg.normalize_columns},
                 {"n_states", model.layout.n_states},
                 {"n_controls", model.layout.n_controls}};
    json& r = out.report;
    r["schema"] = config::kSchema;
    r["status"] = "ok";
    r["equations"] = out.equations;
    r["coefficients"] = config::matrix_to_json(model.coefficients.xi);
    r["feature_names"] = model.coefficients.names;
    r["target_names"] = model.target_names;
    r["score"] = {{"metric", "r2"},
                  {"train", train_r2},
                  {"test", nullable(test_r2)},
                  {"rmse_train", train_rmse},
                  {"rmse_test", nullable(test_rmse)}};
    r["diagnostics"] = diagnostics_json(model.coefficients.diagnostics, dropped_rows);
    r["model"] = model_j;
    r["data"] = {{"train_time_points", train.grid().time_points()},
                 {"test_time_points", test ? test->grid().time_points() : 0},
                 {"train_fraction", cfg.train_fraction}};
    if (model.ensemble) {
        r["ensemble"] = {{"inclusion_probability", config::matrix_to_json(model.ensemble->inclusion_probability)},
                         {"iqr", config::matrix_to_json(model.ensemble->iqr)},
                         {"n_members", model.ensemble->members.size()},
                         {"member_errors", model.ensemble->member_errors},
                         {"spec", config::to_json(*cfg.ensemble)}};
    }
    out.prediction_csv = prediction_table(model, test ? *test : train);
    return out;
}

FittedModel model_from_report(const json& report) {
    try {
        if (report.value("schema", 0) != config::kSchema) throw ConfigError("report: unsupported schema");
        if (report.value("status", "") != "ok") throw ConfigError("report: no fitted model (status is not ok)");
        const json& m = report.at("model");
        FittedModel model;
        model.library = config::library_from_json(m.at("library"), "model.library");
        model.diff.time = config::diff_from_json(m.at("diff"), "model.diff");
        if (m.contains("spatial_diff")) model.diff.space = config::diff_from_json(m.at("spatial_diff"), "model.spatial_diff");
        model.optimizer = config::optimizer_from_json(m.at("optimizer"), "model.optimizer");
        model.layout = InputLayout{m.at("n_states").get<std::size_t>(), m.at("n_controls").get<std::size_t>()};
        model.target_names = report.at("target_names").get<std::vector<std::string>>();

        auto names = report.at("feature_names").get<std::vector<std::string>>();
        if (names != feature_names(*model.library, model.layout)) {
            throw ConfigError("report: feature names do not match the stored library");
        }
        Coefficients& c = model.coefficients;
        c.xi = config::matrix_from_json(report.at("coefficients"), "coefficients");
        if (c.xi.rows() != Eigen::Index(names.size()) || c.xi.cols() != Eigen::Index(model.target_names.size())) {
            throw ConfigError("report: coefficient shape does not match the library");
        }
        c.support = c.xi.array() != 0.0;
        c.names = std::move(names);
        c.residuals = Eigen::VectorXd::Zero(c.xi.cols());
        return model;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("report: ") + e.what());
    }
}

json score_report(const json& report, const Dataset& data) {
    const FittedModel model = model_from_report(report);
    if (data.n_states() != model.layout.n_states || data.n_controls() != model.layout.n_controls) {
        throw ConfigError("model has " + std::to_string(model.layout.n_states) + " states and " +
                          std::to_string(model.layout.n_controls) + " controls, dataset has " +
                          std::to_string(data.n_states()) + " and " + std::to_string(data.n_controls()));
    }
    const Eigen::MatrixXd pred = predict(model, data);
    const Eigen::MatrixXd truth = computed_targets(model, data);
    return json{{"schema", config::kSchema},
                {"r2", score_values(pred, truth, Metric::r2)},
                {"rmse", score_values(pred, truth, Metric::rmse)},
                {"n_samples", pred.rows()}};
}

int cmd_generate(const fs::path& spec_file, const fs::path& out_dir, std::optional<std::uint64_t> seed, bool verbose,
                 std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        json j = config::load_json(spec_file);
        if (seed) j["seed"] = *seed;
        const int schema = j.value("schema", config::kSchema);
        if (schema != config::kSchema) throw ConfigError("schema: unsupported version " + std::to_string(schema));
        const BenchmarkSpec spec = config::benchmark_from_json(j, "");
        if (verbose) err << "generating " << j.at("system").get<std::string>() << "\n";
        const Benchmark b = generate(spec);
        const InputLayout layout{b.data.n_states(), 0};
        json truth{{"schema", config::kSchema},
                   {"library", config::to_json(*b.library)},
                   {"feature_names", feature_names(*b.library, layout)},
                   {"target_names", json::array()},
                   {"coefficients", config::matrix_to_json(b.truth.xi)},
                   {"spec", config::to_json(spec)}};
        for (std::size_t t = 0; t < b.data.n_states(); ++t) truth["target_names"].push_back("q" + std::to_string(t) + "_t");
        if (std::holds_alternative<KSSpec>(spec.system)) truth["max_imaginary_residue"] = b.max_imaginary;

        io::write_dataset_dir(b.data, out_dir);
        if (b.data.grid().spatial.empty()) io::write_dataset_csv(b.data, out_dir / "data.csv");
        io::write_file_atomic(out_dir / "truth.json", truth.dump(2) + "\n");
        const auto shape = b.data.sample_shape();
        out << "wrote " << out_dir.string() << " (";
        for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
        out << " samples, " << b.data.n_states() << " states)\n";
        return int(kOk);
    });
}

int cmd_fit(const fs::path& config_file, const std::optional<fs::path>& out_dir, std::optional<std::uint64_t> seed,
            const std::optional<std::string>& diff, const std::optional<std::string>& optimizer,
            const std::optional<std::string>& ensemble, bool verbose, std::ostream& out, std::ostream& err) {
    fs::path dir;
    config::DiscoveryConfig cfg;
    const int code = guarded(err, [&] {
        json j = config::load_json(config_file);
        if (diff) j["diff"] = *diff;
        if (optimizer) j["optimizer"] = *optimizer;
        if (ensemble) j["ensemble"] = *ensemble;
        cfg = config::config_from_json(j, seed);
        dir = out_dir ? *out_dir : cfg.output;
        if (cfg.data_path && cfg.data_path->is_relative()) cfg.data_path = config_file.parent_path() / *cfg.data_path;

        const FitOutputs res = run_fit(cfg, verbose ? &err : nullptr);
        fs::create_directories(dir);
        io::write_file_atomic(dir / "report.json", res.report.dump(2) + "\n");
        io::write_file_atomic(dir / "equations.txt", joined(res.equations));
        io::write_file_atomic(dir / "prediction_vs_truth.csv", res.prediction_csv);
        out << joined(res.equations);
        return int(kOk);
    });
    if (code == kFitError && !dir.empty()) {
        // Record the failure next to where the report would have been.
        guarded(err, [&] {
            json failed{{"schema", config::kSchema}, {"status", "failed"}, {"error", "fit"}, {"config", config::to_json(cfg)}};
            fs::create_directories(dir);
            io::write_file_atomic(dir / "report.json", failed.dump(2) + "\n");
            return 0;
        });
    }
    return code;
}

int cmd_score(const fs::path& report_file, const std::optional<fs::path>& data_path,
              const std::optional<fs::path>& config_file, const std::optional<fs::path>& out_dir, std::ostream& out,
              std::ostream& err) {
    return guarded(err, [&] {
        if (bool(data_path) == bool(config_file)) throw ConfigError("score needs exactly one of --data or --config");
        const json report = config::load_json(report_file);
        Dataset data;
        if (data_path) {
            data = io::read_dataset(*data_path);
        } else {
            auto cfg = config::config_from_json(config::load_json(*config_file));
            if (cfg.data_path && cfg.data_path->is_relative()) cfg.data_path = config_file->parent_path() / *cfg.data_path;
            data = load_data(cfg);
            if (cfg.train_fraction < 1.0) data = split_train_test(data, cfg.train_fraction).second;
        }
        const json metrics = score_report(report, data);
        if (out_dir) {
            fs::create_directories(*out_dir);
            io::write_file_atomic(*out_dir / "score.json", metrics.dump(2) + "\n");
        }
        out << metrics.dump() << "\n";
        return int(kOk);
    });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sparse model discovery for ODEs and PDEs"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_path, diff, optimizer, ensemble, report_path, data_path;
    std::uint64_t seed = 0;
    bool verbose = false;
    app.add_option("--config", config_path, "JSON spec (generate) or config (fit, score)");
    app.add_option("--out", out_path, "Output directory");
    auto* seed_opt = app.add_option("--seed", seed, "Overrides the top-level seed");
    app.add_flag("--verbose", verbose, "Progress on stderr");

    auto* gen = app.add_subcommand("generate", "Generate a benchmark dataset and its ground truth");
    auto* fit_cmd = app.add_subcommand("fit", "Fit a model from a config");
    auto* diff_opt = fit_cmd->add_option("--diff", diff, "fd:<order> | sg:<window>,<poly> | spectral[:<filter>]");
    auto* opt_opt = fit_cmd->add_option("--optimizer", optimizer, "stlsq:λ,α | sr3:λ,ν,l0|l1 | ssr | frols");
    auto* ens_opt = fit_cmd->add_option("--ensemble", ensemble, "n=20,rows=0.6,drop=0,agg=median,seed=...");
    auto* score_cmd = app.add_subcommand("score", "Score a saved report on a dataset");
    score_cmd->add_option("--report", report_path, "report.json from fit")->required();
    auto* data_opt = score_cmd->add_option("--data", data_path, "Dataset directory or CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return kConfigError;
    }

    auto maybe = [](const std::string& s, const CLI::Option* o) {
        return o->count() ? std::optional<std::string>(s) : std::nullopt;
    };
    const std::optional<std::uint64_t> seed_override = seed_opt->count() ? std::optional(seed) : std::nullopt;
    const std::optional<fs::path> out_dir = out_path.empty() ? std::nullopt : std::optional<fs::path>(out_path);
    if (gen->parsed()) {
        if (config_path.empty() || out_path.empty()) {
            err << "generate needs --config and --out\n";
            return kConfigError;
        }
        return cmd_generate(config_path, out_path, seed_override, verbose, out, err);
    }
    if (fit_cmd->parsed()) {
        if (config_path.empty()) {
            err << "fit needs --config\n";
            return kConfigError;
        }
        return cmd_fit(config_path, out_dir, seed_override, maybe(diff, diff_opt), maybe(optimizer, opt_opt),
                       maybe(ensemble, ens_opt), verbose, out, err);
    }
    const std::optional<fs::path> config_file = config_path.empty() ? std::nullopt : std::optional<fs::path>(config_path);
    return cmd_score(report_path, data_opt->count() ? std::optional<fs::path>(data_path) : std::nullopt, config_file,
                     out_dir, out, err);
}

}  // namespace sindy::cli
