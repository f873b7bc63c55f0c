// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace afcn {

/// Base of every library exception.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid hyperparameters or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Tensor shape mismatch.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed or missing input files.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// API misuse (e.g. backward on a non-scalar).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf escaped an operation.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace afcn
