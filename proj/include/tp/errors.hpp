#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tp {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor shapes fed to an operation do not agree.
struct DimensionError : Error {
    using Error::Error;
};

// NaN or Inf where finite values are required.
struct NumericError : Error {
    using Error::Error;
};

// The pairwise loss needs at least two samples per batch.
struct ContrastiveBatchError : Error {
    using Error::Error;
};

// Malformed container or checkpoint payload; carries the byte offset of the defect.
struct FormatError : Error {
    FormatError(const std::string& msg, std::size_t at)
        : Error(msg + " (byte offset " + std::to_string(at) + ")"), offset(at) {}
    std::size_t offset;
};

struct ConfigError : Error {
    using Error::Error;
};

}  // namespace tp
