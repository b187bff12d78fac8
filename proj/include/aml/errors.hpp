#pragma once

#include <stdexcept>
#include <string>

namespace aml {

/// Base of every failure the library reports. `exit_code()` follows the CLI
/// convention: 1 config, 2 non-convergence, 3 resource/grid.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual int exit_code() const noexcept { return 1; }
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

// Convergence / regularity failures (exit code 2).
class ConvergenceError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

class NotConverged : public ConvergenceError {
public:
    using ConvergenceError::ConvergenceError;
};

class NotRegular : public ConvergenceError {
public:
    using ConvergenceError::ConvergenceError;
};

class NoRoot : public ConvergenceError {
public:
    using ConvergenceError::ConvergenceError;
};

class StepUnstable : public ConvergenceError {
public:
    using ConvergenceError::ConvergenceError;
};

// Domain / precondition violations (exit code 1 unless overridden).
class TooFewSamples : public Error {
public:
    using Error::Error;
};

class NonCausal : public Error {
public:
    using Error::Error;
};

class NonPositiveTime : public Error {
public:
    using Error::Error;
};

class ParticleOverlap : public Error {
public:
    using Error::Error;
};

class NonMonotoneDeflection : public Error {
public:
    using Error::Error;
};

class NotAsymptoticallyIdentical : public Error {
public:
    using Error::Error;
};

class UnresolvedBoundary : public Error {
public:
    using Error::Error;
};

class DiscontinuityDetected : public Error {
public:
    using Error::Error;
};

class NotInvariant : public Error {
public:
    using Error::Error;
};

class ZeroExperimentMass : public Error {
public:
    using Error::Error;
};

// Grid/resource failures (exit code 3).
class GridTooSmall : public Error {
public:
    GridTooSmall(const std::string& what, double at_time) : Error(what), time_(at_time) {}
    int exit_code() const noexcept override { return 3; }
    double time() const noexcept { return time_; }

private:
    double time_;
};

class BoxUnresolvable : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

}  // namespace aml
