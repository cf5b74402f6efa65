#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fawmf {

// Every library failure derives from Error so callers can map categories to
// exit codes without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Input violates an operation's precondition (empty data, bad sizes, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint or report file does not match the expected layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value showed up during training or gradient evaluation.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace fawmf
