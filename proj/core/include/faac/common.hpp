#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace faac {

inline constexpr const char* kVersion = "0.1.0";

// Error taxonomy. The CLI maps these onto exit codes: bad inputs and
// configuration mismatches exit 1, I/O and numeric failures exit 2,
// broken internal contracts exit 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A caller violated an operation's precondition (bad argument ranges,
// mismatched shapes, out-of-range indices).
struct ParamError : Error {
    using Error::Error;
};

// Inconsistent configuration: missing prerequisite checkpoint, wrong mode
// pairing, disabled feature requested.
struct ConfigError : Error {
    using Error::Error;
};

// A numeric computation produced non-finite values or failed to converge.
struct NumericError : Error {
    using Error::Error;
};

// An internal invariant did not hold. Always a bug or corrupted state.
struct InvariantViolation : Error {
    using Error::Error;
};

#define FAAC_REQUIRE(cond, msg)                                      \
    do {                                                             \
        if (!(cond)) throw ::faac::ParamError(std::string(msg));     \
    } while (0)

#define FAAC_CHECK_CONFIG(cond, msg)                                 \
    do {                                                             \
        if (!(cond)) throw ::faac::ConfigError(std::string(msg));    \
    } while (0)

#define FAAC_CHECK_INVARIANT(cond, msg)                                  \
    do {                                                                 \
        if (!(cond)) throw ::faac::InvariantViolation(std::string(msg)); \
    } while (0)

}  // namespace faac
