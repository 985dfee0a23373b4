#pragma once

#include <stdexcept>
#include <string>

namespace hota {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad input: malformed files, out-of-domain arguments, unsupported
/// combinations of options. The CLI maps these to exit code 2.
class ValidationError : public Error {
  public:
    explicit ValidationError(const std::string& what) : Error(what) {}
};

class ParseError : public ValidationError {
  public:
    ParseError(const std::string& what, std::size_t line)
        : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class DomainError : public ValidationError {
  public:
    explicit DomainError(const std::string& what) : ValidationError(what) {}
};

/// Failure of a numerical procedure on otherwise valid input. The CLI maps
/// these to exit code 3.
class NumericalError : public Error {
  public:
    explicit NumericalError(const std::string& what) : Error(what) {}
};

class ConvergenceError : public NumericalError {
  public:
    explicit ConvergenceError(const std::string& what) : NumericalError(what) {}
};

/// The r* curve (or the profile behind it) violates a structural property:
/// sign consistency, monotonicity, nonnegative deviance.
class CurveError : public NumericalError {
  public:
    explicit CurveError(const std::string& what) : NumericalError(what) {}
};

}  // namespace hota
