#pragma once
#include <stdexcept>
#include <string>

namespace gsqg {

/// Root of every error raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or parameters (CLI exit code 2).
struct ConfigError : Error {
    using Error::Error;
};

/// A numerical procedure did not reach its target (CLI exit code 3).
struct NumericError : Error {
    using Error::Error;
};

/// Evaluation requested outside a tabulated range.
struct RangeError : NumericError {
    using NumericError::NumericError;
};

/// Osgood tail classification inside the tolerance band.
struct IndeterminateError : NumericError {
    using NumericError::NumericError;
};

/// Patches closer than the quadrature can resolve.
struct ContactError : NumericError {
    using NumericError::NumericError;
};

/// Mathematically expected negative outcome, e.g. an Osgood-divergent kernel
/// has no finite collision time (CLI exit code 4).
struct NoFiniteCollisionTime : Error {
    using Error::Error;
};

}  // namespace gsqg
