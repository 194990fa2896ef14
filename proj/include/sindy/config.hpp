#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "sindy/data.hpp"
#include "sindy/diff.hpp"
#include "sindy/ensemble.hpp"
#include "sindy/library.hpp"
#include "sindy/model.hpp"
#include "sindy/optimize.hpp"
#include "sindy/systems.hpp"

namespace sindy::config {

using nlohmann::json;

inline constexpr int kSchema = 1;

// Every spec has an object form; diff methods, optimizers and ensembles also
// accept the command-line shorthand as a string. Parse errors are ConfigError
// and name the offending field ("library.parts[1].degree: ...").

json to_json(const DiffMethod& method);
DiffMethod diff_from_json(const json& j, const std::string& where = "diff");

json to_json(const LibrarySpec& spec);
LibraryPtr library_from_json(const json& j, const std::string& where = "library");

json to_json(const OptimizerSpec& spec);
OptimizerSpec optimizer_from_json(const json& j, const std::string& where = "optimizer",
                                  std::uint64_t default_seed = 0);

json to_json(const EnsembleSpec& spec);
EnsembleSpec ensemble_from_json(const json& j, const std::string& where = "ensemble",
                                std::uint64_t default_seed = 0);

// {"system": "lorenz" | "ks", <system parameters>..., "noise", "seed"}
json to_json(const BenchmarkSpec& spec);
BenchmarkSpec benchmark_from_json(const json& j, const std::string& where = "benchmark",
                                  std::uint64_t default_seed = 0);

struct NoiseSettings {
    double level = 0.0;
    NoiseScale scale = NoiseScale::relative_rms;
};

/// A complete fit run.
///
/// {"schema": 1,
///  "data": {"path": "..."} | {"benchmark": {...}}, "allow_missing": false,
///  "train_fraction": 0.6, "diff": ..., "spatial_diff": ..., "library": {...},
///  "optimizer": ..., "ensemble": ..., "normalize_columns": false,
///  "noise": {"level": 0.0, "scale": "relative" | "absolute"},
///  "output": "out", "seed": 0, "precision": 3}
///
/// `seed` seeds the added noise and is the default for nested seeds that are
/// not given explicitly.
struct DiscoveryConfig {
    std::optional<std::filesystem::path> data_path;
    std::optional<BenchmarkSpec> benchmark;
    bool allow_missing = false;
    double train_fraction = 0.6;
    DiffSettings diff;
    LibraryPtr library;  // absent: the benchmark's canonical library, else Poly(2)
    OptimizerSpec optimizer = STLSQ{};
    std::optional<EnsembleSpec> ensemble;
    bool normalize_columns = false;
    NoiseSettings noise;
    std::filesystem::path output = "out";
    std::uint64_t seed = 0;
    int precision = 3;
};

/// `seed_override` replaces the top-level seed before nested defaults apply.
DiscoveryConfig config_from_json(const json& j, std::optional<std::uint64_t> seed_override = std::nullopt);
json to_json(const DiscoveryConfig& config);

/// Reads and parses a JSON file; unreadable or malformed files are ConfigError.
json load_json(const std::filesystem::path& path);

json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const json& j, const std::string& where);

}  // namespace sindy::config
