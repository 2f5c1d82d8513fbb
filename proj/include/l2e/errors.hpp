#pragma once

#include <stdexcept>
#include <string>

namespace l2e {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Inconsistent matrix/vector dimensions. The message names the offending
// dimensions.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Invalid scalar argument (non-positive precision, inverted bounds,
// threshold outside its range, non-finite input, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Unknown or incompatible structural constraint.
class ConstraintError : public Error {
public:
    using Error::Error;
};

// Non-finite values produced during iteration. Carries the iteration index
// at which the failure was detected.
class NumericalError : public Error {
public:
    NumericalError(const std::string& msg, int iteration)
        : Error(msg + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration) {}

    int iteration() const { return iteration_; }

private:
    int iteration_;
};

// Problems with external data (files, CSV cells, column selection).
class DataError : public Error {
public:
    enum class Code {
        missing_file,
        bad_cell,
        missing_column,
        constant_column,
        bad_format,
    };

    DataError(Code code, const std::string& msg) : Error(msg), code_(code) {}

    Code code() const { return code_; }

private:
    Code code_;
};

}  // namespace l2e
