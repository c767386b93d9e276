#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ecocal {

// Value outside the mathematical domain of an operation (scaled parameter
// out of [0,1], soil moisture outside [w_r, w_s], ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A computation produced a non-finite or otherwise unusable number.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Two series that must share timestamps/channels do not.
class AlignmentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Kernel matrix could not be factorized even after jitter escalation.
class IllConditionedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration value or preset entry.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed text input. Carries the 1-based line number (0 when the error is
// not tied to a line, e.g. an empty file).
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : std::runtime_error(source + (line ? ":" + std::to_string(line) : std::string{}) + ": " + what),
          line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace ecocal
