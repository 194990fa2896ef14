#pragma once

namespace sindy {

// Selects between the OpenMP kernels and their serial reference versions.
// Both produce bit-identical results; the serial path exists for testing and
// benchmarking.
enum class Execution { serial, parallel };

}  // namespace sindy
