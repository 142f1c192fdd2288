#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace staggercast {

/// Raised when a configuration document fails validation. `path()` is a
/// JSON-pointer-like location of the offending field, e.g. `/apps/Email/genre_mix`.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& message)
        : std::runtime_error(path.empty() ? message : path + ": " + message),
          path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// A trace CSV row that could not be parsed. Line numbers are 1-based and
/// count the header line.
class TraceError : public std::runtime_error {
public:
    TraceError(std::size_t line, const std::string& message)
        : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InsufficientCredits : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Runtime failure inside a simulation run (missing profile, event past horizon).
class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace staggercast
