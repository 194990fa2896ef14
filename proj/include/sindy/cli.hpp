#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sindy/config.hpp"
#include "sindy/model.hpp"

namespace sindy::cli {

enum ExitCode : int {
    kOk = 0,
    kUnexpected = 1,
    kConfigError = 2,
    kDataError = 3,
    kFitError = 4,
};

struct FitOutputs {
    config::json report;
    std::vector<std::string> equations;
    std::string prediction_csv;  // sample, then predicted and computed value per target
};

/// Loads data, fits, scores and builds the report. Throws ConfigError,
/// DataError or FitError.
FitOutputs run_fit(const config::DiscoveryConfig& config, std::ostream* log = nullptr);

/// Rebuilds the fitted model stored in a report.
FittedModel model_from_report(const config::json& report);

/// Loads the dataset named by a config (file or generated benchmark), with noise applied.
Dataset load_data(const config::DiscoveryConfig& config);

/// {"schema", "r2", "rmse", "n_samples"} of a saved model on a dataset.
config::json score_report(const config::json& report, const Dataset& data);

// Subcommands; each returns an exit code and reports errors on `err`.
int cmd_generate(const std::filesystem::path& spec_file, const std::filesystem::path& out_dir,
                 std::optional<std::uint64_t> seed, bool verbose, std::ostream& out, std::ostream& err);
int cmd_fit(const std::filesystem::path& config_file, const std::optional<std::filesystem::path>& out_dir,
            std::optional<std::uint64_t> seed, const std::optional<std::string>& diff,
            const std::optional<std::string>& optimizer, const std::optional<std::string>& ensemble, bool verbose,
            std::ostream& out, std::ostream& err);
int cmd_score(const std::filesystem::path& report_file, const std::optional<std::filesystem::path>& data_path,
              const std::optional<std::filesystem::path>& config_file, const std::optional<std::filesystem::path>& out_dir,
              std::ostream& out, std::ostream& err);

/// Parses the command line and dispatches.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sindy::cli
