#pragma once

#include <array>
#include <cstdint>
#include <variant>

#include "sindy/data.hpp"
#include "sindy/library.hpp"
#include "sindy/model.hpp"
#include "sindy/optimize.hpp"

namespace sindy {

/// dx/dt = sigma (y - x), dy/dt = x (rho - z) - y, dz/dt = x y - beta z.
struct LorenzSpec {
    double sigma = 10.0;
    double rho = 28.0;
    double beta = 8.0 / 3.0;
    std::array<double, 3> initial{-8.0, 8.0, 27.0};
    double t_start = 0.0;
    double t_end = 10.0;
    double dt = 0.002;
};

/// u_t = -u u_x - u_xx - u_xxxx on the periodic domain [0, length).
struct KSSpec {
    double length = 100.0;
    int n_grid = 1024;
    double dt = 0.01;         // integrator step
    double dt_save = 0.4;
    int n_saves = 251;
    double burn_in = 50.0;
    int n_modes = 4;          // random-phase cosines in the initial condition
    int max_wavenumber = 8;
};

struct BenchmarkSpec {
    std::variant<LorenzSpec, KSSpec> system;
    double noise = 0.0;  // relative to the state RMS
    std::uint64_t seed = 0;
};

struct Benchmark {
    Dataset data;
    LibraryPtr library;      // canonical discovery library
    Coefficients truth;      // generating coefficients under `library`
    double max_imaginary = 0.0;  // KS only: largest imaginary residue after inverse transforms
};

void validate(const BenchmarkSpec& spec);

/// Poly(2) for Lorenz; PDE(D=4) with Poly(2) factors for KS.
LibraryPtr canonical_library(const BenchmarkSpec& spec);

Benchmark generate(const BenchmarkSpec& spec);

/// Relative RMS of Q_t - Theta * truth. A zero truth gives 1.
double verify_residual(const Dataset& data, const Coefficients& truth, const LibrarySpec& library,
                       const DiffSettings& diff);

}  // namespace sindy
