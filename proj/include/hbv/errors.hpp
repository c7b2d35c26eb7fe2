#ifndef HBV_ERRORS_HPP
#define HBV_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace hbv {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Configuration-class errors (a CLI maps these to exit code 2).

// A parameter or state violates a structural invariant (non-finite, negative,
// alpha outside (0,1], ...). The message names the violated invariant.
struct InvalidInput : Error {
    using Error::Error;
};

// Bad API usage: unknown parameter name, empty input list, grid too coarse.
struct UsageError : Error {
    using Error::Error;
};

// A rate constant is zero where an analysis needs it strictly positive.
struct DegenerateParameter : Error {
    using Error::Error;
};

// An LHS range collapsed to a point (zero baseline value).
struct DegenerateRange : Error {
    using Error::Error;
};

// R_s <= 0: capsid dynamics unbounded, threshold quantities undefined.
struct ThresholdViolation : Error {
    using Error::Error;
};

// Numeric-class errors (a CLI maps these to exit code 3).

// Requested quantity does not exist for these parameters (e.g. endemic
// equilibrium with r0 <= 1). Carries the computed r0.
struct Nonexistence : Error {
    double r0;
    Nonexistence(const std::string& msg, double r0_value) : Error(msg), r0(r0_value) {}
};

// Function evaluated outside its mathematical domain (log of a non-positive
// compartment value).
struct DomainError : Error {
    using Error::Error;
};

// Integration produced a non-finite value. Carries the simulation time.
struct OverflowError : Error {
    double time;
    OverflowError(const std::string& msg, double t) : Error(msg), time(t) {}
};

// A compartment went negative beyond tolerance under the reject policy.
struct NegativityError : Error {
    double time;
    NegativityError(const std::string& msg, double t) : Error(msg), time(t) {}
};

// Every optimizer restart failed to produce a finite objective.
struct FitFailure : Error {
    using Error::Error;
};

} // namespace hbv

#endif
