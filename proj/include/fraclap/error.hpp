#pragma once

#include <stdexcept>
#include <string>

namespace fraclap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside the mathematical domain of an operation (e.g. alpha not in (0,2)).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A singular cell integral that diverges (|xi|^-p with p >= d at the origin).
class NonIntegrable : public Error {
 public:
  using Error::Error;
};

/// Adaptive quadrature ran out of its subdivision budget before meeting tolerance.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

/// Dense oracle refused a problem larger than its configured cap.
class CapExceeded : public Error {
 public:
  using Error::Error;
};

/// CG detected a non-positive curvature direction.
class BreakdownNonSPD : public Error {
 public:
  using Error::Error;
};

class PicardNotConverged : public Error {
 public:
  using Error::Error;
};

class NonNestedGrids : public Error {
 public:
  using Error::Error;
};

/// Malformed or corrupt binary file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// File does not start with the expected magic bytes.
class BadMagic : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace fraclap
