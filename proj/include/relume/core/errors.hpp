#pragma once

#include <stdexcept>
#include <string>

namespace relume {

struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct TypeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotFoundError : IoError {
    using IoError::IoError;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// NaN/Inf detected mid-computation; message names the offending tensor.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InternalError : std::logic_error {
    using std::logic_error::logic_error;
};

struct CompatibilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace relume
