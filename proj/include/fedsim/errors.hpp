#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedsim {

// Root of every error the library raises. Callers that only care about
// "something in fedsim failed" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Raised when local training produces a non-finite loss or weight.
// round/client are -1 until the orchestrator attaches context.
class DivergenceError : public Error {
 public:
  DivergenceError(std::string what, int epoch, int round = -1, int client = -1)
      : Error(std::move(what)), epoch_(epoch), round_(round), client_(client) {}

  int epoch() const noexcept { return epoch_; }
  int round() const noexcept { return round_; }
  int client() const noexcept { return client_; }

 private:
  int epoch_;
  int round_;
  int client_;
};

}  // namespace fedsim
