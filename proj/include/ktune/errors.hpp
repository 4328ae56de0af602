#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ktune {

/// Base class for every error thrown by the library.
struct Error: std::runtime_error {
    explicit Error(const std::string& msg): std::runtime_error(msg) {}
};

// =============================================================================
// Parameter space
// =============================================================================

/// A parameter with the same name was already added to the space.
struct DuplicateParameter: Error {
    explicit DuplicateParameter(const std::string& name):
        Error("duplicate parameter: \"" + name + "\""),
        name(name) {}
    std::string name;
};

/// A parameter was declared with an empty list of values.
struct EmptyValueList: Error {
    explicit EmptyValueList(const std::string& name):
        Error("parameter \"" + name + "\" has an empty value list"),
        name(name) {}
    std::string name;
};

/// A constraint expression references a parameter the space does not define.
struct UnknownParameter: Error {
    explicit UnknownParameter(const std::string& name):
        Error("unknown parameter: \"" + name + "\""),
        name(name) {}
    std::string name;
};

/// A constraint expression failed to parse. `offset` is the 0-based character
/// position of the first offending token in the original text.
struct SyntaxError: Error {
    SyntaxError(const std::string& text, size_t offset, const std::string& what):
        Error("syntax error at offset " + std::to_string(offset) + " in \""
              + text + "\": " + what),
        text(text),
        offset(offset) {}
    std::string text;
    size_t offset;
};

/// Integer division or modulo by zero while evaluating a constraint.
/// `subexpression` is the source text of the offending division.
struct DivisionByZero: Error {
    explicit DivisionByZero(const std::string& subexpression):
        Error("division by zero in subexpression \"" + subexpression + "\""),
        subexpression(subexpression) {}
    std::string subexpression;
};

/// A configuration is malformed for the space at hand (missing parameter,
/// value not in the parameter's list, ...).
struct InvalidConfiguration: Error {
    explicit InvalidConfiguration(const std::string& msg):
        Error("invalid configuration: " + msg) {}
};

/// Explicit enumeration was requested for a space whose raw size exceeds the
/// enumeration limit.
struct ExplicitEnumerationTooLarge: Error {
    ExplicitEnumerationTooLarge(unsigned long long raw_size,
                                unsigned long long limit):
        Error("explicit enumeration refused: raw space size "
              + std::to_string(raw_size) + " exceeds limit "
              + std::to_string(limit)),
        raw_size(raw_size),
        limit(limit) {}
    unsigned long long raw_size;
    unsigned long long limit;
};

// =============================================================================
// Search
// =============================================================================

/// The space contains no valid configuration at all.
struct EmptySpace: Error {
    EmptySpace(): Error("search space contains no valid configuration") {}
    explicit EmptySpace(const std::string& msg): Error(msg) {}
};

/// A fraction > 1 asked for more unique evaluations than the space holds.
struct BudgetExceedsSpace: Error {
    BudgetExceedsSpace(size_t requested, unsigned long long available):
        Error("requested budget of " + std::to_string(requested)
              + " unique evaluations exceeds the " + std::to_string(available)
              + " valid configurations available"),
        requested(requested),
        available(available) {}
    size_t requested;
    unsigned long long available;
};

/// Simulated annealing requires a strictly positive temperature.
struct NonPositiveTemperature: Error {
    explicit NonPositiveTemperature(double value):
        Error("temperature must be > 0, got " + std::to_string(value)),
        value(value) {}
    double value;
};

/// PSO probabilities must each lie in [0,1] and sum to at most 1.
struct InvalidProbabilities: Error {
    explicit InvalidProbabilities(const std::string& msg):
        Error("invalid PSO probabilities: " + msg) {}
};

// =============================================================================
// Tuner
// =============================================================================

/// A divide thread-size modifier did not divide evenly.
struct InexactDivision: Error {
    InexactDivision(size_t dim, unsigned long long numerator,
                    unsigned long long divisor):
        Error("thread-size modifier: " + std::to_string(numerator)
              + " is not divisible by " + std::to_string(divisor)
              + " in dimension " + std::to_string(dim)),
        dim(dim),
        numerator(numerator),
        divisor(divisor) {}
    size_t dim;
    unsigned long long numerator;
    unsigned long long divisor;
};

/// A divide thread-size modifier has a zero divisor.
struct ZeroDivisor: Error {
    explicit ZeroDivisor(size_t dim):
        Error("thread-size modifier: zero divisor in dimension "
              + std::to_string(dim)),
        dim(dim) {}
    size_t dim;
};

/// Device limits rejected every configuration of a non-empty user space.
struct EmptySpaceAfterConstraints: Error {
    EmptySpaceAfterConstraints():
        Error("no configuration survives the device-limit constraints") {}
};

/// The job references a backend that is not registered / usable.
struct BackendUnavailable: Error {
    explicit BackendUnavailable(const std::string& name):
        Error("backend unavailable: \"" + name + "\""),
        name(name) {}
    std::string name;
};

/// Candidate and reference outputs disagree in shape (buffer count, length,
/// or element type).
struct ShapeMismatch: Error {
    explicit ShapeMismatch(const std::string& msg):
        Error("output shape mismatch: " + msg) {}
};

// =============================================================================
// Backends
// =============================================================================

/// A synthetic model was asked to price a configuration whose parameter names
/// it does not recognize.
struct UnknownParameterSet: Error {
    explicit UnknownParameterSet(const std::string& msg):
        Error("unknown parameter set: " + msg) {}
};

/// A replay file is syntactically broken or contains duplicate keys.
/// `line` is 1-based.
struct MalformedReplayFile: Error {
    MalformedReplayFile(size_t line, const std::string& what):
        Error("malformed replay file, line " + std::to_string(line) + ": "
              + what),
        line(line) {}
    size_t line;
};

/// A recorded evaluation time is not strictly positive.
struct NonPositiveTime: Error {
    explicit NonPositiveTime(double value):
        Error("evaluation time must be > 0, got " + std::to_string(value)),
        value(value) {}
    double value;
};

/// The external runner process could not be spawned.
struct SpawnFailure: Error {
    explicit SpawnFailure(const std::string& msg):
        Error("failed to spawn external runner: " + msg) {}
};

/// The external runner violated the request/response protocol.
struct ProtocolViolation: Error {
    explicit ProtocolViolation(const std::string& msg):
        Error("external runner protocol violation: " + msg) {}
};

// =============================================================================
// Landscapes / CLI
// =============================================================================

/// No best-known entry or device model for the given device name.
struct UnknownDevice: Error {
    explicit UnknownDevice(const std::string& name):
        Error("unknown device: \"" + name + "\""),
        name(name) {}
    std::string name;
};

/// A job file failed validation (I/O, JSON syntax, or schema).
struct JobFileError: Error {
    explicit JobFileError(const std::string& msg):
        Error("job file error: " + msg) {}
};

}  // namespace ktune
