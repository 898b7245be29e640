#pragma once

#include <stdexcept>
#include <string>

namespace lpt {

// Error taxonomy shared across the library. Everything derives from LptError
// so run boundaries can catch the whole family at once.
struct LptError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A parameter vector was constructed or updated with NaN/Inf entries.
struct NonFiniteValue : LptError {
    using LptError::LptError;
};

// A loss evaluation produced a non-finite intermediate or result.
struct NonFiniteLoss : LptError {
    using LptError::LptError;
};

struct BadArgument : LptError {
    using LptError::LptError;
};

// Candidate operation named in a CellSpec that this build does not implement.
struct UnsupportedOp : BadArgument {
    using BadArgument::BadArgument;
};

// The function has no second-derivative path (no dual-number builder).
struct NotDifferentiableTwice : LptError {
    using LptError::LptError;
};

struct DegenerateSplit : LptError {
    using LptError::LptError;
};

// The soft test cardinality dropped below the usable threshold.
struct DegenerateTest : LptError {
    using LptError::LptError;
};

// A finite-difference direction has (near-)zero norm; the FD term is skipped.
struct ZeroDirection : LptError {
    using LptError::LptError;
};

struct IllConditioned : LptError {
    using LptError::LptError;
};

struct ConfigError : LptError {
    using LptError::LptError;
};

struct IoError : LptError {
    using LptError::LptError;
};

} // namespace lpt
