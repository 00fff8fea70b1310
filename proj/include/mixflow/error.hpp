#pragma once

#include <stdexcept>
#include <string>

namespace mixflow {

/// Base of all library errors. `kind()` is a stable token used by the CLI's
/// machine-parsable error line.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

/// Invalid argument or document field; `field()` names the offending field path.
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& message)
        : Error("validation", field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class ParseError : public Error {
public:
    ParseError(long line, const std::string& message)
        : Error("parse", "line " + std::to_string(line) + ": " + message), line_(line) {}

    long line() const noexcept { return line_; }

private:
    long line_;
};

class ReferenceError : public Error {
public:
    explicit ReferenceError(const std::string& message) : Error("reference", message) {}
};

class TopologyError : public Error {
public:
    explicit TopologyError(const std::string& message) : Error("topology", message) {}
};

class NoRouteError : public Error {
public:
    explicit NoRouteError(const std::string& message) : Error("no_route", message) {}
};

class VersionError : public Error {
public:
    explicit VersionError(const std::string& message) : Error("version", message) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error("config", message) {}
};

/// Commands addressed to vehicles that are not live robot vehicles.
class StaleCommandError : public Error {
public:
    explicit StaleCommandError(const std::string& message) : Error("stale_command", message) {}
};

/// Non-finite parameters or losses during training.
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& message) : Error("divergence", message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("io", message) {}
};

}  // namespace mixflow
