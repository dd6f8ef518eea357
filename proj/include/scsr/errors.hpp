#pragma once

#include <stdexcept>
#include <string>

namespace scsr {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor or image dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity appeared where only finite values are allowed.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Domain precondition violated (invalid config value, bad argument).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  enum class Kind { Corrupt, VersionMismatch, ConfigMismatch, ShapeMismatch };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Training stopped because a loss term or activation became non-finite.
class TrainingAbort : public Error {
 public:
  TrainingAbort(std::string term, const std::string& what) : Error(what), term_(std::move(term)) {}
  const std::string& term() const noexcept { return term_; }

 private:
  std::string term_;
};

}  // namespace scsr
