#pragma once

#include <stdexcept>
#include <string>

namespace advkit {

// Base class for all toolkit errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor shape disagreement (matmul inner dims, elementwise mismatch, ...).
struct ShapeError : Error {
    using Error::Error;
};

// Numeric error state: NaN/Inf produced, log of non-positive, divide by zero.
struct NumericError : Error {
    using Error::Error;
};

// Malformed files: weight files, CIFAR-10 batches, config documents.
struct FormatError : Error {
    using Error::Error;
};

// Config values outside documented invariants, unknown keys, missing fields.
struct ConfigError : Error {
    using Error::Error;
};

// Filesystem failures (unreadable path, write failure).
struct IoError : Error {
    using Error::Error;
};

} // namespace advkit
