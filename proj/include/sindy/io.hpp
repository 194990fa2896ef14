#pragma once

#include <filesystem>
#include <string>

#include "sindy/data.hpp"

namespace sindy::io {

// Dataset directory layout:
//   meta.json    {"schema":1, "n_states", "n_controls", "axes":[...], "dtype":"f64",
//                 "order":"time-major", optional "periodic":[bool...]}
//   states.f64   little-endian float64, shape (spatial..., time, n_states)
//   controls.f64 optional, shape (spatial..., time, n_controls)
//   derivs.f64   optional, same shape as states
// Each entry of "axes" is {"name", "values":[...]} or {"name", "start", "step", "count"};
// spatial axes come first and the time axis ("t") last.

void write_dataset_dir(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset_dir(const std::filesystem::path& dir, bool allow_missing = false);

// CSV with header `t,[x,...],q1..qn[,u1..ur]`, one row per grid sample.
// Spatial columns are any columns not named t, q*, u*.
void write_dataset_csv(const Dataset& dataset, const std::filesystem::path& file);
Dataset read_dataset_csv(const std::filesystem::path& file, bool allow_missing = false);

/// Dispatches on the path: a directory holds meta.json, otherwise CSV.
Dataset read_dataset(const std::filesystem::path& path, bool allow_missing = false);

/// Writes `contents` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace sindy::io
