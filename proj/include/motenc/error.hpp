#pragma once

#include <stdexcept>
#include <string>

namespace motenc {

// Base class for everything thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/layer dimension mismatches.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Out-of-range or otherwise invalid call arguments.
class ParamError : public Error {
 public:
  using Error::Error;
};

// Inconsistent architecture/training configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Bad input data (non-finite values, malformed recordings, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents; carries a line number when one is known.
class ParseError : public DataError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : DataError(file + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  explicit ParseError(const std::string& what) : DataError(what), line_(0) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Filesystem-level failures (open/read/write).
class IoError : public Error {
 public:
  using Error::Error;
};

// Checkpoint / binary container load failures, one type per failure mode.
class CheckpointError : public IoError {
 public:
  using IoError::IoError;
};
class FormatError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class VersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class TruncatedError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class ChecksumError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

// Evaluation could not produce a result (e.g. no valid windows).
class EvalError : public Error {
 public:
  using Error::Error;
};

// Numeric breakdown at runtime (NaN loss and friends).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace motenc
