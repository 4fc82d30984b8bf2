#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace protodep {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Bad input data: malformed files, invariant violations (CLI exit code 3).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Incompatible matrix shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or divergence (CLI exit code 4).
class NumericError : public Error {
 public:
  using Error::Error;
};

class ParseError : public InputError {
 public:
  ParseError(const std::string& where, std::size_t line, const std::string& what)
      : InputError(where + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class LookupError : public InputError {
 public:
  using InputError::InputError;
};

class ConsistencyError : public InputError {
 public:
  using InputError::InputError;
};

class TemplateError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace protodep
