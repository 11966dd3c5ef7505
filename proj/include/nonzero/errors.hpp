#pragma once

#include <stdexcept>
#include <string>

namespace nonzero {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A joint action whose length or entries do not fit the action space.
class InvalidAction : public Error {
 public:
  using Error::Error;
};

// A direction (i <- j) applied where j already equals a_i.
class InfeasibleDeviation : public Error {
 public:
  using Error::Error;
};

// Two directions on the same agent.
class InvalidPair : public Error {
 public:
  using Error::Error;
};

// Pair sampling requested on a single-agent space.
class NoPairAvailable : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyBatch : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced by a parameter update.
class NumericFailure : public Error {
 public:
  using Error::Error;
};

// Exhaustive enumeration requested above the configured cap.
class CapExceeded : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace nonzero
