// error taxonomy shared by all modules
#ifndef EDENVFI_ERRORS_HPP
#define EDENVFI_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace edenvfi {

// base class so callers can catch everything from this library at once
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// tensor rank/shape violations, mismatched operand dimensions
struct ShapeError : Error {
    using Error::Error;
};

// API misuse that is not a shape problem (non-scalar backward root, ...)
struct ContractError : Error {
    using Error::Error;
};

// NaN/Inf encountered where finite values are required
struct NumericError : Error {
    using Error::Error;
};

// filesystem and stream failures
struct IoError : Error {
    using Error::Error;
};

// malformed file contents (bad magic, truncation, undecodable image)
struct FormatError : Error {
    using Error::Error;
};

// invalid model configuration
struct ConfigError : Error {
    using Error::Error;
};

// training-loop failures (divergence)
struct TrainingError : Error {
    using Error::Error;
};

} // namespace edenvfi

#endif
