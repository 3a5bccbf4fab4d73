#pragma once

#include <stdexcept>
#include <string>

namespace lipgate {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched widths, image sizes or tensor shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An argument outside its documented domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Loss or activation became NaN/Inf. `layer()` names the first offending layer.
class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(std::string layer, const std::string& what)
      : Error(what), layer_(std::move(layer)) {}
  const std::string& layer() const noexcept { return layer_; }

 private:
  std::string layer_;
};

/// Input with zero spread; a perturbation relative to its std is undefined.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Rank correlation undefined because one side has zero rank variance.
class UndefinedCorrelationError : public Error {
 public:
  using Error::Error;
};

/// No referral fraction reaches the requested MAE limit.
class InfeasibleThresholdError : public Error {
 public:
  InfeasibleThresholdError(double min_achievable, const std::string& what)
      : Error(what), min_achievable_(min_achievable) {}
  double min_achievable_mae() const noexcept { return min_achievable_; }

 private:
  double min_achievable_;
};

/// Malformed file contents (bad magic, truncated record, unknown enum value).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Stored CRC-32 does not match the file body.
class CrcMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// File written by an incompatible format version.
class VersionMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Invalid or unknown configuration keys/values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure (unreadable or unwritable path).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace lipgate
