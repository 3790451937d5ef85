#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace diagno {

/// Input or invariant violation. The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Malformed file content; carries the 1-based line number of the offending line.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Numerical failure at runtime (singular systems, exhausted retries). Exit code 2.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace diagno
