#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cgflow {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Structural misuse: fields or operators living on different grids.
class GridMismatchError : public Error {
 public:
  explicit GridMismatchError(const std::string& what) : Error(what) {}
};

// A diagonal solve hit a (numerically) zero symbol at a mode whose
// right-hand-side component is not negligible.
class SingularOperatorError : public Error {
 public:
  SingularOperatorError(const std::string& what, std::vector<int> mode)
      : Error(what), mode_(std::move(mode)) {}
  const std::vector<int>& mode() const { return mode_; }

 private:
  std::vector<int> mode_;
};

// sqrt(∫F + C0) (or the Q-analogue) would take a non-positive argument.
class PositivityError : public Error {
 public:
  explicit PositivityError(const std::string& what) : Error(what) {}
};

// The closed-form multiplier predictor has a vanishing denominator; callers
// fall back to the previous multiplier value.
class DegeneratePredictorError : public Error {
 public:
  explicit DegeneratePredictorError(const std::string& what) : Error(what) {}
};

// A multiplier equation could not be resolved (Newton divergence, missing
// bracket, negative discriminant).  Carries the iteration trace; the standard
// remedy is a smaller time step.
class MultiplierFailure : public Error {
 public:
  struct TracePoint {
    double x;
    double residual;
  };

  MultiplierFailure(const std::string& what, std::vector<TracePoint> trace)
      : Error(what), trace_(std::move(trace)) {}
  const std::vector<TracePoint>& trace() const { return trace_; }

 private:
  std::vector<TracePoint> trace_;
};

}  // namespace cgflow
