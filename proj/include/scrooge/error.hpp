#pragma once

#include <stdexcept>
#include <string>

namespace scrooge {

/// Invalid scene / run configuration (bad keys, panel does not fit, ...).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Geometric impossibility (transmitter on an element, point on an element, ...).
struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Coupled-field solver failed to reach the required residual.
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed or truncated on-disk artifact.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Codebook was compiled for a different scene than the one provided.
struct FingerprintMismatch : FormatError {
    using FormatError::FormatError;
};

}  // namespace scrooge
