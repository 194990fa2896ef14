#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sindy {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Index of the time axis when an axis is addressed by number; spatial axes
// are numbered 0, 1, ...
inline constexpr int kTimeAxis = -1;

/// A strictly increasing sampling coordinate.
struct Axis {
    std::string name;
    std::vector<double> values;
    bool uniform = false;
    bool periodic = false;

    /// Validates length >= 2 and strict monotonicity, and computes `uniform`.
    static Axis make(std::string name, std::vector<double> values, bool periodic = false);
    static Axis linspace(std::string name, double start, double step, std::size_t count,
                         bool periodic = false);

    std::size_t size() const { return values.size(); }
    // Mean spacing; equals the step on uniform axes.
    double spacing() const;
};

// Relative tolerance used for the uniformity flag.
inline constexpr double kUniformTolerance = 1e-10;

struct Grid {
    Axis time;
    std::vector<Axis> spatial;

    std::size_t spatial_points() const;
    std::size_t time_points() const { return time.size(); }
    std::size_t sample_count() const { return spatial_points() * time_points(); }
    const Axis& axis(int id) const;
};

/// States sampled on a space-time grid.
///
/// Storage is row-major over (spatial axes..., time, variable): the flattened
/// sample matrix is a zero-copy view, with rows ordered time-major within each
/// spatial point and spatial points ordered lexicographically.
class Dataset {
public:
    Dataset() = default;
    Dataset(Grid grid, std::size_t n_states, std::vector<double> states,
            std::size_t n_controls = 0, std::optional<std::vector<double>> controls = std::nullopt,
            std::optional<std::vector<double>> derivatives = std::nullopt,
            bool allow_missing = false);

    const Grid& grid() const { return grid_; }
    std::size_t n_states() const { return n_states_; }
    std::size_t n_controls() const { return n_controls_; }
    std::size_t sample_count() const { return grid_.sample_count(); }
    bool allow_missing() const { return allow_missing_; }

    const std::vector<double>& states() const { return states_; }
    const std::optional<std::vector<double>>& controls() const { return controls_; }
    const std::optional<std::vector<double>>& derivatives() const { return derivatives_; }

    // m x n views in flatten order.
    Eigen::Map<const RowMatrix> state_matrix() const;
    std::optional<Eigen::Map<const RowMatrix>> control_matrix() const;
    std::optional<Eigen::Map<const RowMatrix>> derivative_matrix() const;

    double state(std::size_t spatial_index, std::size_t t, std::size_t var) const {
        return states_[(spatial_index * grid_.time_points() + t) * n_states_ + var];
    }

    // Shape of the sample dimensions: spatial axis lengths followed by the time length.
    std::vector<std::size_t> sample_shape() const;

    Dataset with_states(std::vector<double> states) const;
    Dataset with_derivatives(std::optional<std::vector<double>> derivatives) const;

private:
    Grid grid_;
    std::size_t n_states_ = 0;
    std::size_t n_controls_ = 0;
    std::vector<double> states_;
    std::optional<std::vector<double>> controls_;
    std::optional<std::vector<double>> derivatives_;
    bool allow_missing_ = false;
};

/// Several datasets sharing state and control dimension; grids may differ.
class TrajectoryCollection {
public:
    TrajectoryCollection() = default;
    explicit TrajectoryCollection(std::vector<Dataset> members);
    TrajectoryCollection(Dataset single);  // NOLINT: implicit by intent

    const std::vector<Dataset>& members() const { return members_; }
    std::size_t size() const { return members_.size(); }
    const Dataset& operator[](std::size_t i) const { return members_[i]; }
    std::size_t n_states() const { return members_.front().n_states(); }
    std::size_t n_controls() const { return members_.front().n_controls(); }

private:
    std::vector<Dataset> members_;
};

struct SampleIndex {
    std::size_t spatial;
    std::size_t time;
};

struct Flattened {
    Eigen::MatrixXd states;                    // m x n
    std::optional<Eigen::MatrixXd> controls;   // m x r
    std::vector<SampleIndex> index;            // row -> grid position
};

/// Stacks the dataset into the m x n sample matrix. When the dataset allows
/// missing values, rows with any NaN are dropped and absent from `index`.
Flattened flatten(const Dataset& dataset);

/// Inverse of `flatten`: scatters rows back onto `like`'s grid. Rows missing
/// from the index become NaN.
Dataset unflatten(const Flattened& flat, const Dataset& like);

/// Train on the first floor(fraction * T) time samples, test on the rest.
std::pair<Dataset, Dataset> split_train_test(const Dataset& dataset, double fraction);

enum class NoiseScale { relative_rms, absolute };

/// Adds i.i.d. Gaussian noise with standard deviation `level * RMS(states)`
/// (or `level` itself for NoiseScale::absolute), reproducibly from `seed`.
Dataset add_noise(const Dataset& dataset, double level, std::uint64_t seed,
                  NoiseScale scale = NoiseScale::relative_rms);

/// Subset of time samples [begin, end) of every spatial point.
Dataset slice_time(const Dataset& dataset, std::size_t begin, std::size_t end);

double rms(std::span<const double> values);

}  // namespace sindy
