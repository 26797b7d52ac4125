#pragma once

#include <stdexcept>
#include <string>

namespace diffmart {

// Base class for all library failures so the CLI edge can catch one type.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid user-supplied configuration (CLI exit code 1).
struct ConfigError : Error {
    using Error::Error;
};

// A diagnostic that could not decide between its outcomes (CLI exit code 2).
// Raised instead of guessing; the message names the quantity that failed to
// settle.
struct InconclusiveError : Error {
    using Error::Error;
};

// Numeric failures below (CLI exit code 3).

struct QuadratureError : Error {
    QuadratureError(const std::string& what, double a, double b)
        : Error(what), sub_a(a), sub_b(b) {}
    // Offending subinterval, also embedded in the message.
    double sub_a;
    double sub_b;
};

struct SolverError : Error {
    using Error::Error;
};

struct SimulationError : Error {
    using Error::Error;
};

// Evaluation outside an interpolant's grid hull.
struct HullError : Error {
    using Error::Error;
};

} // namespace diffmart
