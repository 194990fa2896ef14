#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "sindy/error.hpp"
#include "sindy/io.hpp"

using namespace sindy;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("sindy_io_" + name);
    fs::remove_all(p);
    return p;
}

Dataset field() {
    Grid g{Axis::linspace("t", 0.0, 0.5, 4), {Axis::linspace("x", 0.0, 0.25, 3, true)}};
    std::vector<double> s(12 * 2), u(12), dq(12 * 2);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = 0.1 * double(i) - 1.0;
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = double(i * i);
    for (std::size_t i = 0; i < dq.size(); ++i) dq[i] = -double(i);
    return Dataset(g, 2, s, 1, u, dq);
}

}  // namespace

TEST(DatasetDir, RoundTrip) {
    const auto dir = scratch("dir");
    const Dataset d = field();
    io::write_dataset_dir(d, dir);
    EXPECT_TRUE(fs::exists(dir / "meta.json"));
    EXPECT_EQ(fs::file_size(dir / "states.f64"), 24 * sizeof(double));
    const Dataset back = io::read_dataset(dir);
    EXPECT_EQ(back.states(), d.states());
    EXPECT_EQ(*back.controls(), *d.controls());
    EXPECT_EQ(*back.derivatives(), *d.derivatives());
    EXPECT_TRUE(back.grid().spatial[0].periodic);
    EXPECT_FALSE(back.grid().time.periodic);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(back.grid().time.values[i], d.grid().time.values[i]);
}

TEST(DatasetDir, SizeMismatch) {
    const auto dir = scratch("bad");
    io::write_dataset_dir(field(), dir);
    std::ofstream(dir / "states.f64", std::ios::binary) << "short";
    EXPECT_THROW(io::read_dataset(dir), DataError);
}

TEST(DatasetCsv, RoundTrip) {
    const auto dir = scratch("csv");
    fs::create_directories(dir);
    const Grid g{Axis::make("t", {0.0, 0.1, 0.3}), {}};
    const Dataset d(g, 2, {1.5, -2.0, 3.25, 4.0, 1e-17, 6.0}, 1, std::vector<double>{7, 8, 9});
    io::write_dataset_csv(d, dir / "d.csv");
    const Dataset back = io::read_dataset(dir / "d.csv");
    EXPECT_EQ(back.states(), d.states());
    EXPECT_EQ(*back.controls(), *d.controls());
    EXPECT_EQ(back.grid().time.values, d.grid().time.values);
}

TEST(DatasetCsv, SpatialColumns) {
    const auto dir = scratch("csv2");
    fs::create_directories(dir);
    std::ofstream(dir / "f.csv") << "t,x,q1\n0,0,1\n0,1,2\n1,0,3\n1,1,4\n";
    const Dataset d = io::read_dataset(dir / "f.csv");
    ASSERT_EQ(d.grid().spatial.size(), 1u);
    EXPECT_EQ(d.state(0, 1, 0), 3.0);
    EXPECT_EQ(d.state(1, 0, 0), 2.0);
}

TEST(DatasetCsv, MissingValues) {
    const auto dir = scratch("csv3");
    fs::create_directories(dir);
    std::ofstream(dir / "m.csv") << "t,q1\n0,1\n1,nan\n2,3\n";
    EXPECT_THROW(io::read_dataset(dir / "m.csv"), DataError);
    EXPECT_NO_THROW(io::read_dataset(dir / "m.csv", true));
}

TEST(AtomicWrite, NoTemporaryLeftBehind) {
    const auto dir = scratch("atomic");
    fs::create_directories(dir);
    io::write_file_atomic(dir / "a.txt", "hello");
    io::write_file_atomic(dir / "a.txt", "world");
    std::ifstream in(dir / "a.txt");
    std::string s;
    in >> s;
    EXPECT_EQ(s, "world");
    EXPECT_EQ(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}), 1);
}
