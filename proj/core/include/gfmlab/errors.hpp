#pragma once

#include <stdexcept>
#include <string>

namespace gfmlab {

// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite or out-of-domain argument.
class InvalidInputError : public Error {
public:
    using Error::Error;
};

// Division by a dynamic quantity that reached zero (e.g. rotor speed).
class SingularityError : public Error {
public:
    using Error::Error;
};

// A voltage command dropped below zero.
class VoltageCollapseError : public Error {
public:
    using Error::Error;
};

// Virtual-oscillator amplitude fell below the configured floor.
class OscillatorCollapseError : public Error {
public:
    using Error::Error;
};

// Branch reactance is not strictly positive.
class InvalidImpedanceError : public Error {
public:
    using Error::Error;
};

// Requested power transfer exceeds the static limit of the line.
class TransferLimitError : public Error {
public:
    using Error::Error;
};

// Blend weights violate the feasible set.
class ConstraintViolationError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent configuration input.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Linear-algebra or iteration failure inside a numeric routine.
class NumericError : public Error {
public:
    using Error::Error;
};

// Iterative minimizer diverged or stalled without reaching its tolerance.
class OptimizationFailureError : public Error {
public:
    using Error::Error;
};

// Wraps any error raised while a scenario is running, tagged with the
// simulation time at which it occurred.
class SimulationAbortError : public Error {
public:
    SimulationAbortError(double timestamp, const std::string& why)
        : Error("simulation aborted at t=" + std::to_string(timestamp) + " s: " + why),
          timestamp_(timestamp) {}

    double timestamp() const { return timestamp_; }

private:
    double timestamp_;
};

}  // namespace gfmlab
