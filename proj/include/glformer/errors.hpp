#pragma once

#include <stdexcept>
#include <string>

namespace glformer {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Index outside a documented range.
class IndexError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Malformed input file.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input with semantically invalid values.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Inconsistent configuration (dimensions, unknown keys, bad ranges).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

// Metric undefined for the given labels (e.g. no positives).
class MetricError : public Error {
 public:
  using Error::Error;
};

// Training / evaluation protocol cannot proceed (e.g. empty split).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// A finite-difference oracle cannot be trusted (non-deterministic objective).
class OracleError : public Error {
 public:
  using Error::Error;
};

}  // namespace glformer
