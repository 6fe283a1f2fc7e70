#pragma once

#include <stdexcept>
#include <string>

namespace cmkerr {

/// Base for all library errors. The CLI maps each subclass to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input values: zero volume, sign mismatch, empty grid, ...
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed to deliver (non-convergence, insufficient signal).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or malformed files.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration or command-line usage.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace cmkerr
