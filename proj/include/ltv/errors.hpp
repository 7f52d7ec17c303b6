#pragma once

#include <stdexcept>
#include <string>

namespace ltv {

// Bad input data (unparseable files, empty cohorts, missing artifacts).
// Maps to CLI exit code 3.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure (series non-convergence, overflow, degenerate fits).
// Maps to CLI exit code 4.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Command line / config misuse. Maps to CLI exit code 2.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ltv
