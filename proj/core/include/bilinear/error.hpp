#pragma once

#include <stdexcept>
#include <string>

namespace bilinear {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InvalidDimension : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class InvalidRank : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

class InternalConsistency : public Error {
 public:
  using Error::Error;
};

class DegenerateArmSet : public Error {
 public:
  using Error::Error;
};

// Raised while loading or validating an experiment configuration; field()
// names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error("config field '" + field + "': " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace bilinear
