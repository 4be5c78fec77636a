#pragma once

#include <array>
#include <functional>
#include <optional>
#include <utility>

#include "cgflow/models.hpp"

namespace cgflow {

struct NewtonConfig {
  double rel_tol = 1e-12;
  double abs_tol = 1e-14;
  int max_iters = 50;
  double fd_step = 1e-7;  // for numerically differentiated residuals
  // Correction equations (eta) disable the bracketing fallback: near a
  // degeneracy, bisection digs out far-away roots instead of admitting that
  // no usable root exists.
  bool bisection_fallback = true;
};

struct MultiplierSolveReport {
  double root = 0.0;
  double root2 = 0.0;  // second component for 2-variable solves
  int iterations = 0;
  double residual = 0.0;
  double predictor_used = 0.0;
};

// Scalar Newton with a bisection fallback: if Newton stalls or diverges, a
// sign change is searched on [guess-w, guess+w] with w doubling from 1 up to
// 10 times.  Pass a null derivative to use central differences.
MultiplierSolveReport newton_scalar(
    const std::function<double(double)>& residual,
    const std::function<double(double)>& derivative, double guess,
    const NewtonConfig& cfg = {});

// Coupled 2-variable Newton.  The optional Jacobian callback returns
// {dR1/dx, dR1/dy, dR2/dx, dR2/dy}; central differences otherwise.
MultiplierSolveReport newton_2d(
    const std::function<double(double, double)>& r1,
    const std::function<double(double, double)>& r2,
    const std::function<std::array<double, 4>(double, double)>& jacobian,
    std::pair<double, double> guess, const NewtonConfig& cfg = {});

// Real root of a*x^2 + b*x + c = 0 nearest to the predictor.  Degenerate and
// no-real-root cases raise MultiplierFailure; thresholds are relative to
// max(|a|,|b|,|c|) so the selection is scale invariant.
double solve_constraint_quadratic(double a, double b, double c,
                                  double predictor);

struct SchemeState;  // defined in steppers.hpp

// lambda of the linear SAV scheme, used as the Newton initial guess for the
// exact-constraint schemes.  Recomputes the two split solves from the state.
double lambda_predictor_linear_sav(const SchemeState& state,
                                   const GenericModel& model, double dt);

}  // namespace cgflow
