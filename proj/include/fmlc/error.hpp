#pragma once

#include <stdexcept>
#include <string>

namespace fmlc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violation on caller-supplied data (shapes, ranges, ids).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Configuration record fails its invariants (TileSpec, SmoothingParams, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A file could not be decoded. `kind()` distinguishes the failure mode.
class ParseError : public Error {
 public:
  enum class Kind { BadMagic, MalformedHeader, Truncated, ChecksumMismatch };

  ParseError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// The file is well formed but uses a feature outside the supported subset.
/// `feature()` names the offending tag or option.
class UnsupportedFeature : public Error {
 public:
  UnsupportedFeature(std::string feature, const std::string& what)
      : Error(what), feature_(std::move(feature)) {}

  const std::string& feature() const noexcept { return feature_; }

 private:
  std::string feature_;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Stitching left output pixels that no tile covers.
class CoverageError : public Error {
 public:
  using Error::Error;
};

}  // namespace fmlc
