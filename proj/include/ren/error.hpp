#pragma once

#include <stdexcept>
#include <string>

namespace ren {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad argument: wrong dimension, out-of-range id, invalid parameter.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// State that violates a documented invariant (zero impressions, level overflow, ...).
class InvalidState : public Error {
public:
    using Error::Error;
};

/// Non-finite values appeared in an update or a training step.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. `line()` is 1-based; 0 when not tied to a line.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace ren
