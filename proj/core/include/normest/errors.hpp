#pragma once

#include <stdexcept>
#include <string>

namespace normest {

/// Base class for all library errors; the CLI maps any of these to a
/// nonzero exit status with the message on stderr.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// All patch points coincident, or covariance rank < 2.
class DegeneratePatchError : public Error {
 public:
  using Error::Error;
};

/// Fewer samples (or positive weights) than jet coefficients.
class UnderdeterminedSystemError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents; message names the offending line.
class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace normest
