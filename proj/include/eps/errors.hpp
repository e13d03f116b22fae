#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace eps {

// Base of every exception thrown by the library. code() is a stable
// machine-readable identifier (e.g. "IllegalTransition") used by the CLI
// and the HTTP layer to map failures onto exit codes and status codes.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& message, std::size_t line, std::size_t column)
      : Error("SyntaxError", message + " (line " + std::to_string(line) +
                                 ", column " + std::to_string(column) + ")"),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& message) : Error("SchemaError", message) {}

 protected:
  SchemaError(std::string code, const std::string& message)
      : Error(std::move(code), message) {}
};

class DeltaOutOfRange : public SchemaError {
 public:
  explicit DeltaOutOfRange(const std::string& message)
      : SchemaError("DeltaOutOfRange", message) {}
};

class ReferenceError : public Error {
 public:
  explicit ReferenceError(const std::string& message)
      : Error("ReferenceError", message) {}
};

class IncompleteResponses : public Error {
 public:
  explicit IncompleteResponses(const std::string& message)
      : Error("IncompleteResponses", message) {}
};

class UnknownOption : public Error {
 public:
  explicit UnknownOption(const std::string& message)
      : Error("UnknownOption", message) {}
};

class InvalidResponses : public Error {
 public:
  explicit InvalidResponses(const std::string& message)
      : Error("InvalidResponses", message) {}
};

class ZeroMaxScore : public Error {
 public:
  explicit ZeroMaxScore(const std::string& message)
      : Error("ZeroMaxScore", message) {}
};

class EmptyPrincipleSet : public Error {
 public:
  explicit EmptyPrincipleSet(const std::string& message)
      : Error("EmptyPrincipleSet", message) {}
};

class InvalidThresholds : public Error {
 public:
  explicit InvalidThresholds(const std::string& message)
      : Error("InvalidThresholds", message) {}
};

class IllegalTransition : public Error {
 public:
  explicit IllegalTransition(const std::string& message)
      : Error("IllegalTransition", message) {}
};

class MissingRationale : public Error {
 public:
  explicit MissingRationale(const std::string& message)
      : Error("MissingRationale", message) {}
};

class IncompleteCoverage : public Error {
 public:
  explicit IncompleteCoverage(const std::string& message)
      : Error("IncompleteCoverage", message) {}
};

class IncompleteMatrix : public Error {
 public:
  IncompleteMatrix(const std::string& message, std::vector<std::string> cells)
      : Error("IncompleteMatrix", message), cells_(std::move(cells)) {}

  // Missing cells rendered as "<principle>-<level>".
  const std::vector<std::string>& missing_cells() const noexcept { return cells_; }

 private:
  std::vector<std::string> cells_;
};

class UnknownPrinciple : public Error {
 public:
  explicit UnknownPrinciple(const std::string& message)
      : Error("UnknownPrinciple", message) {}
};

class IncompleteFraming : public Error {
 public:
  explicit IncompleteFraming(const std::string& message)
      : Error("IncompleteFraming", message) {}
};

class StateError : public Error {
 public:
  explicit StateError(const std::string& message) : Error("StateError", message) {}
};

class UnsupportedFormat : public Error {
 public:
  explicit UnsupportedFormat(const std::string& message)
      : Error("UnsupportedFormat", message) {}
};

class SequenceConflict : public Error {
 public:
  explicit SequenceConflict(const std::string& message)
      : Error("SequenceConflict", message) {}
};

class NotFound : public Error {
 public:
  explicit NotFound(const std::string& message) : Error("NotFound", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("ConfigError", message) {}
};

}  // namespace eps
