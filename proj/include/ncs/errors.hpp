#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ncs {

// Base of every error the toolkit raises. Callers that only care about
// "something went wrong" catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonStochastic : public Error { using Error::Error; };
class NegativeEntry : public Error { using Error::Error; };
class TooFewModes : public Error { using Error::Error; };
class ShapeMismatch : public Error { using Error::Error; };
class DimensionMismatch : public Error { using Error::Error; };
class NonUnique : public Error { using Error::Error; };
class DelayZero : public Error { using Error::Error; };
class DelayNonzero : public Error { using Error::Error; };
class OutOfHorizon : public Error { using Error::Error; };
class DegenerateWindow : public Error { using Error::Error; };
class Unstable : public Error { using Error::Error; };
class InvalidWeight : public Error { using Error::Error; };

class PathExplosion : public Error {
 public:
  PathExplosion(std::uint64_t requested, std::uint64_t cap);
  std::uint64_t requested;
  std::uint64_t cap;
};

// Raised when a Riccati-type inner matrix loses positive definiteness.
// `k` is the time index (or iteration count for stationary solvers).
class GammaNotPositiveDefinite : public Error {
 public:
  GammaNotPositiveDefinite(int k, int mode, double min_eig);
  int k;
  int mode;
  double min_eig;
};

class UpsilonNotPositiveDefinite : public Error {
 public:
  UpsilonNotPositiveDefinite(int k, int mode, double min_eig);
  int k;
  int mode;
  double min_eig;
};

class NotConverged : public Error {
 public:
  NotConverged(int iterations, double residual);
  int iterations;
  double residual;
};

// Configuration problems carry the dotted path of the offending field,
// e.g. "plant.R".
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what);
  std::string field;
};

}  // namespace ncs
