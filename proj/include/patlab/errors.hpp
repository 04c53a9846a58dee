#pragma once

#include <stdexcept>
#include <string>

namespace patlab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation was called with arguments outside its contract.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Domain geometry does not fit the grid, or radii are inconsistent.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// An iterative method hit its iteration cap.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A geometric hypothesis (convexity, no critical points, non-trapping)
/// fails for the supplied data. The CLI maps this to exit status 2.
class HypothesisError : public Error {
 public:
  using Error::Error;
};

}  // namespace patlab
