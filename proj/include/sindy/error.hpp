#pragma once

#include <stdexcept>
#include <string>

namespace sindy {

// Configuration or specification problem (bad parameters, unknown names).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Input data problem (shape mismatch, unreadable files, non-finite values).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure while fitting or integrating.
class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace sindy
