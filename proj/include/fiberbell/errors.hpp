#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fiberbell {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An input violates a domain invariant (range, normalization, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed text input. line() is 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Count data inconsistent with the rate model.
class DataError : public Error {
public:
    using Error::Error;
};

/// Fit did not converge or is not identifiable.
class FitError : public Error {
public:
    using Error::Error;
};

}  // namespace fiberbell
