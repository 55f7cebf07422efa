#pragma once

#include <stdexcept>
#include <string>

namespace blocksplit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Operands of different dimensions were combined.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// A parameter is outside its admissible range (weights, step sizes, set
/// parameters, averagedness constants).
class DomainError : public Error {
public:
  using Error::Error;
};

/// An operator produced NaN or Inf, or the iteration diverged.
class NonFiniteError : public Error {
public:
  using Error::Error;
};

/// The block schedule does not satisfy the K-window covering condition.
class CoveringError : public Error {
public:
  using Error::Error;
};

/// Malformed or inconsistent experiment configuration / input files.
class ConfigError : public Error {
public:
  using Error::Error;
};

} // namespace blocksplit
