#pragma once

#include <stdexcept>
#include <string>

namespace csc {

// Every failure surfaced to callers carries a stable machine-parsable class
// name; the CLI maps each class to a distinct exit code and prints a single
// "<class>: <message>" line.
class Error : public std::runtime_error {
 public:
  Error(std::string error_class, const std::string& message, int exit_code)
      : std::runtime_error(error_class + ": " + message),
        error_class_(std::move(error_class)),
        exit_code_(exit_code) {}

  const std::string& error_class() const { return error_class_; }
  int exit_code() const { return exit_code_; }

 private:
  std::string error_class_;
  int exit_code_;
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error("io-error", m, 3) {}
};
struct ParseError : Error {
  explicit ParseError(const std::string& m) : Error("parse-error", m, 4) {}
};
struct DuplicateError : Error {
  explicit DuplicateError(const std::string& m) : Error("duplicate-error", m, 5) {}
};
struct CoverageError : Error {
  explicit CoverageError(const std::string& m) : Error("coverage-error", m, 6) {}
};
struct VocabError : Error {
  explicit VocabError(const std::string& m) : Error("vocab-error", m, 7) {}
};
struct ShapeError : Error {
  explicit ShapeError(const std::string& m) : Error("shape-error", m, 8) {}
};
struct LengthError : Error {
  explicit LengthError(const std::string& m) : Error("length-error", m, 9) {}
};
struct CompatError : Error {
  explicit CompatError(const std::string& m) : Error("compat-error", m, 10) {}
};
struct DivergenceError : Error {
  explicit DivergenceError(const std::string& m) : Error("divergence-error", m, 11) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error("config-error", m, 12) {}
};

}  // namespace csc
