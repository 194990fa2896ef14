#include <gtest/gtest.h>

#include <filesystem>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sindy/cli.hpp"
#include "sindy/io.hpp"

namespace fs = std::filesystem;
using namespace sindy;
using sindy::config::json;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("sindy_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write(const std::string& name, const std::string& text) {
        std::ofstream(dir_ / name) << text;
        return dir_ / name;
    }

    int run(std::vector<std::string> args) {
        args.insert(args.begin(), "sindy");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        out_.str("");
        err_.str("");
        return cli::run(int(argv.size()), argv.data(), out_, err_);
    }

    static std::string slurp(const fs::path& p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    fs::path dir_;
    std::ostringstream out_, err_;
};

const char* kLorenzConfig = R"({"schema": 1, "data": {"benchmark": {"system": "lorenz", "t_end": 4.0}},
                                "diff": "fd:4", "optimizer": {"method": "stlsq", "threshold": 0.1}})";

}  // namespace

TEST_F(Cli, GenerateLorenz) {
    const auto spec = write("lorenz.json", R"({"system": "lorenz", "t_end": 1.0})");
    ASSERT_EQ(run({"--config", spec.string(), "--out", (dir_ / "data").string(), "generate"}), 0) << err_.str();
    const Dataset d = io::read_dataset(dir_ / "data");
    EXPECT_EQ(d.n_states(), 3u);
    EXPECT_EQ(d.grid().time_points(), 501u);
    const Dataset csv = io::read_dataset(dir_ / "data" / "data.csv");
    EXPECT_EQ(csv.states(), d.states());
    const json truth = config::load_json(dir_ / "data" / "truth.json");
    EXPECT_EQ(truth["coefficients"].size(), 10u);
    EXPECT_EQ(truth["schema"], 1);
}

TEST_F(Cli, GenerateKS) {
    const auto spec = write("ks.json", R"({"system": "ks", "n_saves": 12, "burn_in": 2.0})");
    ASSERT_EQ(run({"generate", "--config", spec.string(), "--out", (dir_ / "ks").string()}), 0) << err_.str();
    const Dataset d = io::read_dataset(dir_ / "ks");
    EXPECT_EQ(d.sample_shape(), (std::vector<std::size_t>{1024, 12}));
    EXPECT_LE(config::load_json(dir_ / "ks" / "truth.json")["max_imaginary_residue"].get<double>(), 1e-10);
}

TEST_F(Cli, GenerateErrors) {
    const auto bad = write("bad.json", "{\"system\": ");
    EXPECT_EQ(run({"generate", "--config", bad.string(), "--out", (dir_ / "x").string()}), 2);
    const auto field = write("field.json", R"({"system": "ks", "n_grid": 1000})");
    EXPECT_EQ(run({"generate", "--config", field.string(), "--out", (dir_ / "x").string()}), 2);
    EXPECT_NE(err_.str().find("n_grid"), std::string::npos) << err_.str();
    EXPECT_FALSE(fs::exists(dir_ / "x"));
    EXPECT_EQ(run({"generate"}), 2);
    EXPECT_EQ(run({"bogus"}), 2);
}

TEST_F(Cli, FitLorenzWritesOutputs) {
    const auto cfg = write("fit.json", kLorenzConfig);
    const auto out = dir_ / "out";
    ASSERT_EQ(run({"fit", "--config", cfg.string(), "--out", out.string()}), 0) << err_.str();
    const json report = config::load_json(out / "report.json");
    EXPECT_EQ(report["schema"], 1);
    EXPECT_EQ(report["status"], "ok");
    int nonzero = 0;
    for (const auto& row : report["coefficients"])
        for (const auto& v : row) nonzero += v.get<double>() != 0.0;
    EXPECT_EQ(nonzero, 7);
    EXPECT_GE(report["score"]["test"].get<double>(), 0.99);

    const std::string eqs = slurp(out / "equations.txt");
    EXPECT_EQ(std::count(eqs.begin(), eqs.end(), '\n'), 3);
    EXPECT_EQ(eqs.substr(0, 7), "q0_t = ");
    EXPECT_EQ(out_.str(), eqs);

    std::ifstream csv(out / "prediction_vs_truth.csv");
    std::string header;
    std::getline(csv, header);
    EXPECT_EQ(std::count(header.begin(), header.end(), ','), 6);
}

TEST_F(Cli, FitIsByteIdentical) {
    const auto cfg = write("fit.json", R"({"schema": 1, "seed": 3,
        "data": {"benchmark": {"system": "lorenz", "t_end": 3.0, "noise": 0.01}},
        "ensemble": {"n_models": 5}})");
    ASSERT_EQ(run({"fit", "--config", cfg.string(), "--out", (dir_ / "a").string()}), 0) << err_.str();
    ASSERT_EQ(run({"fit", "--config", cfg.string(), "--out", (dir_ / "b").string()}), 0) << err_.str();
    EXPECT_EQ(slurp(dir_ / "a" / "report.json"), slurp(dir_ / "b" / "report.json"));
    ASSERT_EQ(run({"fit", "--config", cfg.string(), "--out", (dir_ / "c").string(), "--seed", "4"}), 0);
    EXPECT_NE(slurp(dir_ / "a" / "report.json"), slurp(dir_ / "c" / "report.json"));
}

TEST_F(Cli, FitOverrides) {
    const auto cfg = write("fit.json", kLorenzConfig);
    ASSERT_EQ(run({"fit", "--config", cfg.string(), "--out", (dir_ / "o").string(), "--optimizer", "frols",
                   "--diff", "sg:9,3"}),
              0)
        << err_.str();
    const json report = config::load_json(dir_ / "o" / "report.json");
    EXPECT_EQ(report["model"]["optimizer"]["method"], "frols");
    EXPECT_EQ(report["model"]["diff"]["method"], "sg");
    EXPECT_EQ(run({"fit", "--config", cfg.string(), "--out", (dir_ / "p").string(), "--optimizer", "lasso"}), 2);
}

TEST_F(Cli, FitExitCodes) {
    write("empty.csv", "t,q1\n");
    const auto empty = write("empty.json", R"({"schema": 1, "data": {"path": "empty.csv"}})");
    EXPECT_EQ(run({"fit", "--config", empty.string(), "--out", (dir_ / "e").string()}), 3);
    const auto missing = write("missing.json", R"({"schema": 1, "data": {"path": "nowhere.csv"}})");
    EXPECT_EQ(run({"fit", "--config", missing.string(), "--out", (dir_ / "m").string()}), 3);
    EXPECT_FALSE(fs::exists(dir_ / "e" / "report.json"));

    // The constrained coefficient multiplies an all-zero column, which the solver drops.
    std::string csv = "t,q1,q2,q3\n";
    for (int i = 0; i < 200; ++i) {
        const double t = 0.01 * i;
        csv += std::to_string(t) + "," + std::to_string(std::sin(t)) + "," + std::to_string(std::cos(t)) + ",0\n";
    }
    write("flat.csv", csv);
    json j = json::parse(R"({"schema": 1, "data": {"path": "flat.csv"}, "library": {"type": "polynomial", "degree": 1}})");
    json row = json::array();
    for (int i = 0; i < 12; ++i) row.push_back(i == 3 ? 1.0 : 0.0);
    j["optimizer"] = {{"method", "sr3"}, {"constraints", {{"lhs", {row}}, {"rhs", {1.0}}}}};
    const auto infeasible = write("infeasible.json", j.dump());
    EXPECT_EQ(run({"fit", "--config", infeasible.string(), "--out", (dir_ / "f").string()}), 4) << err_.str();
    const json failed = config::load_json(dir_ / "f" / "report.json");
    EXPECT_EQ(failed["status"], "failed");

    EXPECT_EQ(run({"fit"}), 2);
}

TEST_F(Cli, ScoreRoundTrip) {
    const auto cfg = write("fit.json", kLorenzConfig);
    ASSERT_EQ(run({"fit", "--config", cfg.string(), "--out", (dir_ / "out").string()}), 0) << err_.str();
    const auto report = (dir_ / "out" / "report.json").string();
    ASSERT_EQ(run({"score", "--report", report, "--config", cfg.string(), "--out", (dir_ / "s").string()}), 0)
        << err_.str();
    const json metrics = config::load_json(dir_ / "s" / "score.json");
    const json saved = config::load_json(report);
    EXPECT_EQ(metrics["r2"].get<double>(), saved["score"]["test"].get<double>());
    EXPECT_EQ(metrics["rmse"].get<double>(), saved["score"]["rmse_test"].get<double>());

    const FittedModel model = cli::model_from_report(saved);
    EXPECT_EQ(config::matrix_to_json(model.coefficients.xi), saved["coefficients"]);
}

TEST_F(Cli, ScorePerfectModelAndMismatch) {
    const auto spec = write("lorenz.json", R"({"system": "lorenz", "t_end": 2.0})");
    ASSERT_EQ(run({"generate", "--config", spec.string(), "--out", (dir_ / "data").string()}), 0);
    const json truth = config::load_json(dir_ / "data" / "truth.json");

    json report{{"schema", 1}, {"status", "ok"}, {"coefficients", truth["coefficients"]}, {"feature_names", truth["feature_names"]},
                {"target_names", truth["target_names"]},
                {"model", {{"library", truth["library"]}, {"diff", {{"method", "fd"}, {"order", 6}}},
                           {"optimizer", {{"method", "stlsq"}}}, {"normalize_columns", false},
                           {"n_states", 3}, {"n_controls", 0}}}};
    const auto path = write("truth_report.json", report.dump());
    ASSERT_EQ(run({"score", "--report", path.string(), "--data", (dir_ / "data").string()}), 0) << err_.str();
    EXPECT_GE(json::parse(out_.str())["r2"].get<double>(), 1.0 - 1e-8);

    write("one.csv", "t,q1\n0,1\n1,2\n2,3\n3,4\n");
    EXPECT_EQ(run({"score", "--report", path.string(), "--data", (dir_ / "one.csv").string()}), 2);
    EXPECT_EQ(run({"score", "--report", path.string()}), 2);
}
