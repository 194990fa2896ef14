#include "sindy/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "sindy/error.hpp"

namespace sindy::io {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "raw float64 files are read and written in native little-endian order");

namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<double> read_f64(const fs::path& path, std::size_t expected) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw DataError("cannot open " + path.string());
    const auto bytes = std::size_t(in.tellg());
    if (bytes != expected * sizeof(double)) {
        throw DataError(path.filename().string() + " holds " + std::to_string(bytes) +
                        " bytes, expected " + std::to_string(expected * sizeof(double)));
    }
    std::vector<double> out(expected);
    in.seekg(0);
    in.read(reinterpret_cast<char*>(out.data()), std::streamsize(bytes));
    if (!in) throw DataError("short read on " + path.string());
    return out;
}

std::string f64_bytes(const std::vector<double>& values) {
    std::string bytes(values.size() * sizeof(double), '\0');
    std::memcpy(bytes.data(), values.data(), bytes.size());
    return bytes;
}

json axis_to_json(const Axis& axis) {
    if (axis.uniform) {
        return {{"name", axis.name},
                {"start", axis.values.front()},
                {"step", axis.spacing()},
                {"count", axis.size()}};
    }
    return {{"name", axis.name}, {"values", axis.values}};
}

Axis axis_from_json(const json& j, bool periodic) {
    const std::string name = j.at("name").get<std::string>();
    if (j.contains("values")) {
        return Axis::make(name, j.at("values").get<std::vector<double>>(), periodic);
    }
    return Axis::linspace(name, j.at("start").get<double>(), j.at("step").get<double>(),
                          j.at("count").get<std::size_t>(), periodic);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cell.erase(0, cell.find_first_not_of(" \t\r"));
        cell.erase(cell.find_last_not_of(" \t\r") + 1);
        cells.push_back(cell);
    }
    return cells;
}

double parse_cell(const std::string& cell) {
    if (cell.empty() || cell == "nan" || cell == "NaN") return std::numeric_limits<double>::quiet_NaN();
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(cell, &used);
    } catch (const std::exception&) {
        throw DataError("unparseable CSV value '" + cell + "'");
    }
    if (used != cell.size()) throw DataError("unparseable CSV value '" + cell + "'");
    return value;
}

bool is_numbered(const std::string& name, char prefix) {
    return name.size() >= 2 && name[0] == prefix &&
           std::all_of(name.begin() + 1, name.end(), [](char c) { return std::isdigit(c); });
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& contents) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out.write(contents.data(), std::streamsize(contents.size()));
        if (!out) {
            out.close();
            fs::remove(tmp);
            throw DataError("write failed for " + path.string());
        }
    }
    fs::rename(tmp, path);
}

void write_dataset_dir(const Dataset& dataset, const fs::path& dir) {
    fs::create_directories(dir);
    const auto& grid = dataset.grid();
    json axes = json::array();
    json periodic = json::array();
    for (const auto& a : grid.spatial) {
        axes.push_back(axis_to_json(a));
        periodic.push_back(a.periodic);
    }
    axes.push_back(axis_to_json(grid.time));
    periodic.push_back(grid.time.periodic);
    json meta = {{"schema", 1},
                 {"n_states", dataset.n_states()},
                 {"n_controls", dataset.n_controls()},
                 {"axes", axes},
                 {"periodic", periodic},
                 {"dtype", "f64"},
                 {"order", "time-major"}};
    write_file_atomic(dir / "states.f64", f64_bytes(dataset.states()));
    if (dataset.controls()) write_file_atomic(dir / "controls.f64", f64_bytes(*dataset.controls()));
    if (dataset.derivatives()) write_file_atomic(dir / "derivs.f64", f64_bytes(*dataset.derivatives()));
    write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");
}

Dataset read_dataset_dir(const fs::path& dir, bool allow_missing) {
    json meta;
    try {
        meta = json::parse(read_text(dir / "meta.json"));
    } catch (const json::exception& e) {
        throw DataError("malformed meta.json: " + std::string(e.what()));
    }
    try {
        if (meta.value("dtype", "f64") != "f64") throw DataError("only dtype f64 is supported");
        if (meta.value("order", "time-major") != "time-major") {
            throw DataError("only time-major order is supported");
        }
        const auto n_states = meta.at("n_states").get<std::size_t>();
        const auto n_controls = meta.value("n_controls", std::size_t{0});
        const auto& axes = meta.at("axes");
        if (axes.empty()) throw DataError("meta.json declares no axes");
        std::vector<bool> periodic(axes.size(), false);
        if (meta.contains("periodic")) {
            periodic = meta.at("periodic").get<std::vector<bool>>();
            if (periodic.size() != axes.size()) throw DataError("periodic flags do not match axes");
        }
        Grid grid;
        for (std::size_t i = 0; i + 1 < axes.size(); ++i) {
            grid.spatial.push_back(axis_from_json(axes[i], periodic[i]));
        }
        grid.time = axis_from_json(axes.back(), periodic.back());
        const std::size_t m = grid.sample_count();
        auto states = read_f64(dir / "states.f64", m * n_states);
        std::optional<std::vector<double>> controls, derivs;
        if (n_controls > 0) controls = read_f64(dir / "controls.f64", m * n_controls);
        if (fs::exists(dir / "derivs.f64")) derivs = read_f64(dir / "derivs.f64", m * n_states);
        return Dataset(std::move(grid), n_states, std::move(states), n_controls,
                       std::move(controls), std::move(derivs), allow_missing);
    } catch (const json::exception& e) {
        throw DataError("invalid meta.json: " + std::string(e.what()));
    }
}

void write_dataset_csv(const Dataset& dataset, const fs::path& file) {
    const auto& grid = dataset.grid();
    std::ostringstream out;
    out.precision(17);
    out << "t";
    for (const auto& a : grid.spatial) out << ',' << a.name;
    for (std::size_t j = 0; j < dataset.n_states(); ++j) out << ",q" << j + 1;
    for (std::size_t j = 0; j < dataset.n_controls(); ++j) out << ",u" << j + 1;
    out << '\n';
    const auto q = dataset.state_matrix();
    const auto u = dataset.control_matrix();
    const std::size_t T = grid.time_points();
    for (std::size_t row = 0; row < dataset.sample_count(); ++row) {
        out << grid.time.values[row % T];
        std::size_t s = row / T;
        std::vector<double> coords(grid.spatial.size());
        for (std::size_t a = grid.spatial.size(); a-- > 0;) {
            coords[a] = grid.spatial[a].values[s % grid.spatial[a].size()];
            s /= grid.spatial[a].size();
        }
        for (double c : coords) out << ',' << c;
        for (Eigen::Index j = 0; j < q.cols(); ++j) out << ',' << q(Eigen::Index(row), j);
        if (u) {
            for (Eigen::Index j = 0; j < u->cols(); ++j) out << ',' << (*u)(Eigen::Index(row), j);
        }
        out << '\n';
    }
    write_file_atomic(file, out.str());
}

Dataset read_dataset_csv(const fs::path& file, bool allow_missing) {
    std::istringstream in(read_text(file));
    std::string line;
    if (!std::getline(in, line)) throw DataError(file.string() + " is empty");
    const auto header = split_csv_line(line);
    int t_col = -1;
    std::vector<std::size_t> space_cols, state_cols, control_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "t") t_col = int(c);
        else if (is_numbered(header[c], 'q')) state_cols.push_back(c);
        else if (is_numbered(header[c], 'u')) control_cols.push_back(c);
        else space_cols.push_back(c);
    }
    if (t_col < 0) throw DataError("CSV header lacks a 't' column");
    if (state_cols.empty()) throw DataError("CSV header lacks state columns q1..qn");

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) throw DataError("ragged CSV row: " + line);
        std::vector<double> row(cells.size());
        std::transform(cells.begin(), cells.end(), row.begin(), parse_cell);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError(file.string() + " has no data rows");

    auto unique_sorted = [&](std::size_t col) {
        std::vector<double> v;
        for (const auto& r : rows) v.push_back(r[col]);
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        return v;
    };
    Grid grid;
    for (std::size_t c : space_cols) grid.spatial.push_back(Axis::make(header[c], unique_sorted(c)));
    grid.time = Axis::make("t", unique_sorted(std::size_t(t_col)));
    const std::size_t m = grid.sample_count();
    if (rows.size() != m) {
        throw DataError("CSV rows do not cover the tensor grid (" + std::to_string(rows.size()) +
                        " rows, grid has " + std::to_string(m) + ")");
    }

    const std::size_t n = state_cols.size(), r = control_cols.size();
    std::vector<double> states(m * n, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> controls(m * r, std::numeric_limits<double>::quiet_NaN());
    std::vector<bool> seen(m, false);
    auto locate = [](const std::vector<double>& axis, double v) {
        return std::size_t(std::lower_bound(axis.begin(), axis.end(), v) - axis.begin());
    };
    for (const auto& row : rows) {
        std::size_t s = 0;
        for (std::size_t a = 0; a < space_cols.size(); ++a) {
            s = s * grid.spatial[a].size() + locate(grid.spatial[a].values, row[space_cols[a]]);
        }
        const std::size_t idx = s * grid.time_points() + locate(grid.time.values, row[std::size_t(t_col)]);
        if (seen[idx]) throw DataError("duplicate grid sample in CSV");
        seen[idx] = true;
        for (std::size_t j = 0; j < n; ++j) states[idx * n + j] = row[state_cols[j]];
        for (std::size_t j = 0; j < r; ++j) controls[idx * r + j] = row[control_cols[j]];
    }
    std::optional<std::vector<double>> ctrl;
    if (r > 0) ctrl = std::move(controls);
    return Dataset(std::move(grid), n, std::move(states), r, std::move(ctrl), std::nullopt,
                   allow_missing);
}

Dataset read_dataset(const fs::path& path, bool allow_missing) {
    if (fs::is_directory(path)) return read_dataset_dir(path, allow_missing);
    if (!fs::exists(path)) throw DataError("dataset path " + path.string() + " does not exist");
    return read_dataset_csv(path, allow_missing);
}

}  // namespace sindy::io
