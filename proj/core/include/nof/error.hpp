#pragma once

#include <stdexcept>
#include <string>

namespace nof {

// Error classes map onto the CLI exit codes: InputError -> 2,
// ConfigError -> 3, NumericalError -> 4. Anything else derived from Error
// is a precondition violation by the caller.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ParseError : public InputError {
 public:
  ParseError(const std::string& what, int line)
      : InputError(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace nof
