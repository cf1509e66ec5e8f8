#ifndef COLA_ERRORS_HPP
#define COLA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cola {

/// Bad experiment configuration or unsupported method/data combination (CLI exit 2).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or non-finite input data (CLI exit 3).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure: degenerate weights, bracket failure, unattainable calibration (CLI exit 4).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace cola

#endif // COLA_ERRORS_HPP
