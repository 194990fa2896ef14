#pragma once

#include <mutex>

namespace sindy::detail {

// FFTW's planner is not thread-safe; execution with new-array functions is.
std::mutex& fftw_planner_mutex();

}  // namespace sindy::detail
