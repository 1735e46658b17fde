#pragma once

#include <stdexcept>
#include <string>

namespace paforge {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised by text-format parsers; carries a 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& message)
        : Error("line " + std::to_string(line) + ": " + message), line_(line) {}
    explicit ParseError(const std::string& message) : Error(message), line_(0) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

}  // namespace paforge
