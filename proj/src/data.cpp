#include "sindy/data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "sindy/error.hpp"

namespace sindy {

Axis Axis::make(std::string name, std::vector<double> values, bool periodic) {
    if (values.size() < 2) {
        throw DataError("axis '" + name + "' needs at least 2 samples");
    }
    double min_step = std::numeric_limits<double>::infinity();
    double max_step = -min_step;
    for (std::size_t i = 1; i < values.size(); ++i) {
        const double step = values[i] - values[i - 1];
        if (!(step > 0.0) || !std::isfinite(step)) {
            throw DataError("axis '" + name + "' is not strictly increasing");
        }
        min_step = std::min(min_step, step);
        max_step = std::max(max_step, step);
    }
    const double mean_step = (values.back() - values.front()) / double(values.size() - 1);
    Axis axis;
    axis.name = std::move(name);
    axis.values = std::move(values);
    axis.uniform = (max_step - min_step) / mean_step <= kUniformTolerance;
    axis.periodic = periodic;
    return axis;
}

Axis Axis::linspace(std::string name, double start, double step, std::size_t count,
                    bool periodic) {
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) values[i] = start + step * double(i);
    return make(std::move(name), std::move(values), periodic);
}

double Axis::spacing() const {
    return (values.back() - values.front()) / double(values.size() - 1);
}

std::size_t Grid::spatial_points() const {
    std::size_t total = 1;
    for (const auto& a : spatial) total *= a.size();
    return total;
}

const Axis& Grid::axis(int id) const {
    if (id == kTimeAxis) return time;
    if (id < 0 || std::size_t(id) >= spatial.size()) {
        throw ConfigError("axis index " + std::to_string(id) + " out of range");
    }
    return spatial[std::size_t(id)];
}

namespace {

void check_finite(const std::vector<double>& values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw DataError(std::string(what) + " contain non-finite values");
        }
    }
}

}  // namespace

Dataset::Dataset(Grid grid, std::size_t n_states, std::vector<double> states,
                 std::size_t n_controls, std::optional<std::vector<double>> controls,
                 std::optional<std::vector<double>> derivatives, bool allow_missing)
    : grid_(std::move(grid)),
      n_states_(n_states),
      n_controls_(n_controls),
      states_(std::move(states)),
      controls_(std::move(controls)),
      derivatives_(std::move(derivatives)),
      allow_missing_(allow_missing) {
    if (n_states_ == 0) throw DataError("dataset needs at least one state variable");
    const std::size_t m = grid_.sample_count();
    if (states_.size() != m * n_states_) {
        throw DataError("state array has " + std::to_string(states_.size()) +
                        " entries, grid implies " + std::to_string(m * n_states_));
    }
    if (controls_.has_value() != (n_controls_ > 0)) {
        throw DataError("control count and control array disagree");
    }
    if (controls_ && controls_->size() != m * n_controls_) {
        throw DataError("control array does not match the grid");
    }
    if (derivatives_ && derivatives_->size() != states_.size()) {
        throw DataError("derivative array does not match the state array");
    }
    if (!allow_missing_) {
        check_finite(states_, "states");
        if (controls_) check_finite(*controls_, "controls");
        if (derivatives_) check_finite(*derivatives_, "derivatives");
    }
}

Eigen::Map<const RowMatrix> Dataset::state_matrix() const {
    return {states_.data(), Eigen::Index(sample_count()), Eigen::Index(n_states_)};
}

std::optional<Eigen::Map<const RowMatrix>> Dataset::control_matrix() const {
    if (!controls_) return std::nullopt;
    return Eigen::Map<const RowMatrix>(controls_->data(), Eigen::Index(sample_count()),
                                       Eigen::Index(n_controls_));
}

std::optional<Eigen::Map<const RowMatrix>> Dataset::derivative_matrix() const {
    if (!derivatives_) return std::nullopt;
    return Eigen::Map<const RowMatrix>(derivatives_->data(), Eigen::Index(sample_count()),
                                       Eigen::Index(n_states_));
}

std::vector<std::size_t> Dataset::sample_shape() const {
    std::vector<std::size_t> shape;
    for (const auto& a : grid_.spatial) shape.push_back(a.size());
    shape.push_back(grid_.time_points());
    return shape;
}

Dataset Dataset::with_states(std::vector<double> states) const {
    return Dataset(grid_, n_states_, std::move(states), n_controls_, controls_, derivatives_,
                   allow_missing_);
}

Dataset Dataset::with_derivatives(std::optional<std::vector<double>> derivatives) const {
    return Dataset(grid_, n_states_, states_, n_controls_, controls_, std::move(derivatives),
                   allow_missing_);
}

TrajectoryCollection::TrajectoryCollection(std::vector<Dataset> members)
    : members_(std::move(members)) {
    if (members_.empty()) throw DataError("trajectory collection is empty");
    for (const auto& d : members_) {
        if (d.n_states() != members_.front().n_states() ||
            d.n_controls() != members_.front().n_controls()) {
            throw DataError("trajectories disagree on state or control dimension");
        }
    }
}

TrajectoryCollection::TrajectoryCollection(Dataset single)
    : TrajectoryCollection(std::vector<Dataset>{std::move(single)}) {}

Flattened flatten(const Dataset& dataset) {
    const std::size_t m = dataset.sample_count();
    const std::size_t n = dataset.n_states();
    const std::size_t r = dataset.n_controls();
    const std::size_t T = dataset.grid().time_points();
    const auto q = dataset.state_matrix();
    const auto u = dataset.control_matrix();

    std::vector<std::size_t> keep;
    keep.reserve(m);
    for (std::size_t row = 0; row < m; ++row) {
        bool ok = q.row(Eigen::Index(row)).allFinite();
        if (u) ok = ok && u->row(Eigen::Index(row)).allFinite();
        if (ok || !dataset.allow_missing()) keep.push_back(row);
    }

    Flattened flat;
    flat.states.resize(Eigen::Index(keep.size()), Eigen::Index(n));
    if (u) flat.controls = Eigen::MatrixXd(Eigen::Index(keep.size()), Eigen::Index(r));
    flat.index.reserve(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        const auto row = Eigen::Index(keep[i]);
        flat.states.row(Eigen::Index(i)) = q.row(row);
        if (u) flat.controls->row(Eigen::Index(i)) = u->row(row);
        flat.index.push_back({keep[i] / T, keep[i] % T});
    }
    return flat;
}

Dataset unflatten(const Flattened& flat, const Dataset& like) {
    const std::size_t n = std::size_t(flat.states.cols());
    const std::size_t T = like.grid().time_points();
    const std::size_t m = like.sample_count();
    std::vector<double> states(m * n, std::numeric_limits<double>::quiet_NaN());
    std::optional<std::vector<double>> controls;
    std::size_t r = 0;
    if (flat.controls) {
        r = std::size_t(flat.controls->cols());
        controls.emplace(m * r, std::numeric_limits<double>::quiet_NaN());
    }
    for (std::size_t i = 0; i < flat.index.size(); ++i) {
        const std::size_t row = flat.index[i].spatial * T + flat.index[i].time;
        for (std::size_t j = 0; j < n; ++j) states[row * n + j] = flat.states(Eigen::Index(i), Eigen::Index(j));
        for (std::size_t j = 0; j < r; ++j) (*controls)[row * r + j] = (*flat.controls)(Eigen::Index(i), Eigen::Index(j));
    }
    const bool dense = flat.index.size() == m;
    return Dataset(like.grid(), n, std::move(states), r, std::move(controls), std::nullopt,
                   like.allow_missing() || !dense);
}

namespace {

std::vector<double> slice_block(const std::vector<double>& data, std::size_t spatial,
                                std::size_t T, std::size_t width, std::size_t begin,
                                std::size_t end) {
    std::vector<double> out;
    out.reserve(spatial * (end - begin) * width);
    for (std::size_t s = 0; s < spatial; ++s) {
        const auto first = data.begin() + std::ptrdiff_t((s * T + begin) * width);
        out.insert(out.end(), first, first + std::ptrdiff_t((end - begin) * width));
    }
    return out;
}

}  // namespace

Dataset slice_time(const Dataset& dataset, std::size_t begin, std::size_t end) {
    const auto& grid = dataset.grid();
    const std::size_t T = grid.time_points();
    if (begin >= end || end > T) throw DataError("invalid time slice");
    Grid sub = grid;
    sub.time = Axis::make(grid.time.name,
                          std::vector<double>(grid.time.values.begin() + std::ptrdiff_t(begin),
                                              grid.time.values.begin() + std::ptrdiff_t(end)),
                          grid.time.periodic);
    const std::size_t S = grid.spatial_points();
    std::optional<std::vector<double>> controls, derivs;
    if (dataset.controls()) controls = slice_block(*dataset.controls(), S, T, dataset.n_controls(), begin, end);
    if (dataset.derivatives()) derivs = slice_block(*dataset.derivatives(), S, T, dataset.n_states(), begin, end);
    return Dataset(std::move(sub), dataset.n_states(),
                   slice_block(dataset.states(), S, T, dataset.n_states(), begin, end),
                   dataset.n_controls(), std::move(controls), std::move(derivs),
                   dataset.allow_missing());
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& dataset, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw ConfigError("train fraction must lie in (0, 1)");
    }
    const std::size_t T = dataset.grid().time_points();
    const auto n_train = std::size_t(std::floor(fraction * double(T)));
    if (n_train < 2 || T - n_train < 2) {
        throw DataError("train fraction " + std::to_string(fraction) + " of " +
                        std::to_string(T) + " time samples leaves a side with fewer than 2");
    }
    return {slice_time(dataset, 0, n_train), slice_time(dataset, n_train, T)};
}

double rms(std::span<const double> values) {
    if (values.empty()) return 0.0;
    double sum = 0.0;
    for (double v : values) sum += v * v;
    return std::sqrt(sum / double(values.size()));
}

Dataset add_noise(const Dataset& dataset, double level, std::uint64_t seed, NoiseScale scale) {
    if (!(level >= 0.0)) throw ConfigError("noise level must be non-negative");
    if (level == 0.0) return dataset;
    const double sigma = scale == NoiseScale::absolute ? level : level * rms(dataset.states());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, sigma);
    std::vector<double> noisy = dataset.states();
    for (double& v : noisy) v += normal(rng);
    // Precomputed derivatives no longer describe the noisy states.
    return Dataset(dataset.grid(), dataset.n_states(), std::move(noisy), dataset.n_controls(),
                   dataset.controls(), std::nullopt, dataset.allow_missing());
}

}  // namespace sindy
