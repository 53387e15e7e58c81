#pragma once

#include <stdexcept>
#include <string>

namespace monoent {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Mismatched dimension, resolution or orientation between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A cube that is not a union of whole grid cells.
class AlignmentError : public Error {
public:
    using Error::Error;
};

// Grid too coarse for the requested construction.
class ResolutionError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class BudgetError : public Error {
public:
    using Error::Error;
};

class CoverageError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

// Raised when a proven counting bound fails; carries the offending level.
class InvariantViolation : public Error {
public:
    InvariantViolation(int level, const std::string& what)
        : Error("level " + std::to_string(level) + ": " + what), level_(level) {}
    int level() const noexcept { return level_; }

private:
    int level_;
};

// Bad user input (flags, files). The CLI maps this to exit code 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

} // namespace monoent
