#pragma once

#include <stdexcept>
#include <string>

namespace roadwarp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or message.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A value that violates a documented type invariant. The message carries the
/// offending field path.
class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& what)
      : Error("invariant violation: " + what) {}
};

/// A warp produced a self-intersecting drivable ring.
class DegenerateWarp : public Error {
 public:
  DegenerateWarp() : Error("degenerate warp") {}
};

/// Failures talking to a predictor (built-in or external).
class PredictorError : public Error {
 public:
  using Error::Error;
};

class PredictorExited : public PredictorError {
 public:
  using PredictorError::PredictorError;
};

class PredictorTimeout : public PredictorError {
 public:
  using PredictorError::PredictorError;
};

class ProtocolError : public PredictorError {
 public:
  using PredictorError::PredictorError;
};

}  // namespace roadwarp
