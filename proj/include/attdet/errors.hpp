#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace attdet {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Scenario file could not be parsed or violates the schema. CLI exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An argument is outside its documented domain (e.g. evaluation time past the horizon).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A constructor/operation parameter violates its precondition.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// One failed scenario validation check, tagged with the node/edge it belongs to.
struct Violation {
    std::string where;  // e.g. "nodes[2]", "edges[0] (1->2)"
    std::string what;
};

/// Scenario failed validation; carries the full list of violations. CLI exit code 2.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<Violation> violations);
    const std::vector<Violation>& violations() const { return violations_; }

private:
    std::vector<Violation> violations_;
};

/// A standing assumption of the design (e.g. E_i(t) > 0) fails at runtime.
class AssumptionError : public Error {
public:
    using Error::Error;
};

/// The Riccati solution left the [alpha1, alpha2] eigenvalue corridor. CLI exit code 1.
class RiccatiUnboundedError : public Error {
public:
    RiccatiUnboundedError(const std::string& msg, double failure_time)
        : Error(msg), failure_time_(failure_time) {}
    double failure_time() const { return failure_time_; }

private:
    double failure_time_;
};

/// Simulated state norm exceeded the divergence bound. CLI exit code 1.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& msg, double time) : Error(msg), time_(time) {}
    double time() const { return time_; }

private:
    double time_;
};

/// A metric was asked for on a series too short to evaluate it.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

}  // namespace attdet
