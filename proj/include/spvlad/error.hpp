#pragma once

#include <stdexcept>
#include <string>

namespace spvlad {

// Base for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Vector or matrix lengths that do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or foreign file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A model container holds a different kind of model than was requested.
class ModelKindError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Input that cannot support the requested fit (too few points, no variance).
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace spvlad
