#pragma once

#include <stdexcept>
#include <string>

namespace hjforms {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition or invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A path edge is not contained in any chart of a chart form.
class ChartGap : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A lifted path or recursion walked off the truncated cover window.
class WindowExceeded : public Error {
 public:
  using Error::Error;
};

/// A field that must be strictly positive is not.
class NonPositive : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Total mass of a density drifted away from one.
class MassDrift : public Error {
 public:
  using Error::Error;
};

/// An iterative solver failed to converge. Subclasses name the failure mode.
class NotConverged : public Error {
 public:
  using Error::Error;
};

/// Picard updates did not decay geometrically on the current window.
class NoContraction : public NotConverged {
 public:
  using NotConverged::NotConverged;
};

/// A time step blew up or a linear system could not be factorized.
class StepRejected : public NotConverged {
 public:
  using NotConverged::NotConverged;
};

}  // namespace hjforms
