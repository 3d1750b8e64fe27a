#pragma once

#include <stdexcept>
#include <string>

#include "tvk/types.hpp"

namespace tvk {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or lengths that do not match the declared dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Snapshot pushed out of order.
class SequencingError : public Error {
 public:
  using Error::Error;
};

// Not enough data retained for the requested view.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class RankError : public Error {
 public:
  RankError(const std::string& what, Index rank, double tol)
      : Error(what + " (numerical rank " + std::to_string(rank) + ", tol " + std::to_string(tol) + ")"),
        rank_(rank),
        tol_(tol) {}
  Index rank() const { return rank_; }
  double tol() const { return tol_; }

 private:
  Index rank_;
  double tol_;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int epoch)
      : Error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

class IntegrationError : public Error {
 public:
  using Error::Error;
};

// Raised when an update is applied although the low-dimensional solve is singular.
class FeasibilityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Closed loop aborted (no usable certificate within the reuse limit).
class ControlError : public Error {
 public:
  using Error::Error;
};

}  // namespace tvk
