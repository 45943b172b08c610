#pragma once

#include <stdexcept>
#include <string>

namespace dtmc {

/// Base class for all toolkit errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Unreadable file, missing required column, malformed model file.
struct IoError : Error {
    using Error::Error;
};

/// Bad flag values, unknown cohort/damage code, mismatched inputs.
struct ConfigError : Error {
    using Error::Error;
};

/// A selection or table ended up with no data to work on.
struct EmptyDataError : Error {
    using Error::Error;
};

/// Fit or ensemble failure (non-finite objective, too many failed replicas).
struct CalibrationError : Error {
    using Error::Error;
};

}
