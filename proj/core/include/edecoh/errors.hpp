#pragma once

#include <stdexcept>
#include <string>

namespace edecoh {

/// Broad failure classes; the CLI maps each to an exit code.
enum class ErrorCategory {
  Config,     // malformed or out-of-range input configuration
  Numerical,  // domain violations, non-convergence, resolution/aliasing
  Io,         // file system and format problems
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

/// Argument outside the mathematical domain of a formula.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what)
      : Error(ErrorCategory::Numerical, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorCategory::Config, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorCategory::Numerical, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::Io, what) {}
};

/// Raised by pipeline stages; keeps the original category and names the stage.
class StageError : public Error {
 public:
  StageError(std::string stage, ErrorCategory category, const std::string& what)
      : Error(category, "[" + stage + "] " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace edecoh
