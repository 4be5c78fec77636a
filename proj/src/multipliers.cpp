#include "cgflow/multipliers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace cgflow {
namespace {

std::string trace_message(const char* what,
                          const std::vector<MultiplierFailure::TracePoint>& tr) {
  std::ostringstream msg;
  msg << what << " (reduce the time step); trace:";
  const std::size_t shown = std::min<std::size_t>(tr.size(), 8);
  for (std::size_t i = tr.size() - shown; i < tr.size(); ++i) {
    msg << " (" << tr[i].x << ", r=" << tr[i].residual << ")";
  }
  return msg.str();
}

}  // namespace

MultiplierSolveReport newton_scalar(
    const std::function<double(double)>& residual,
    const std::function<double(double)>& derivative, double guess,
    const NewtonConfig& cfg) {
  std::vector<MultiplierFailure::TracePoint> trace;
  const double r0 = residual(guess);
  if (!std::isfinite(r0)) {
    throw MultiplierFailure("scalar residual not finite at initial guess",
                            {{guess, r0}});
  }
  const double target = cfg.abs_tol + cfg.rel_tol * std::abs(r0);

  MultiplierSolveReport rep;
  rep.predictor_used = guess;

  double x = guess;
  double r = r0;
  double best_x = x, best_r = std::abs(r);
  trace.push_back({x, r});
  for (int it = 0; it < cfg.max_iters; ++it) {
    if (std::abs(r) <= target) {
      rep.root = x;
      rep.iterations = it;
      rep.residual = r;
      return rep;
    }
    double dr;
    if (derivative) {
      dr = derivative(x);
    } else {
      const double step = cfg.fd_step * (1.0 + std::abs(x));
      dr = (residual(x + step) - residual(x - step)) / (2.0 * step);
    }
    if (!std::isfinite(dr) || dr == 0.0) break;
    const double xn = x - r / dr;
    if (!std::isfinite(xn)) break;
    x = xn;
    r = residual(x);
    if (!std::isfinite(r)) break;
    trace.push_back({x, r});
    if (std::abs(r) < best_r) {
      best_r = std::abs(r);
      best_x = x;
    }
  }
  if (std::abs(r) <= target) {
    rep.root = x;
    rep.iterations = cfg.max_iters;
    rep.residual = r;
    return rep;
  }

  if (!cfg.bisection_fallback) {
    throw MultiplierFailure(
        trace_message("scalar multiplier iteration failed to converge", trace),
        std::move(trace));
  }

  // Bisection fallback on an expanding bracket around the original guess.
  double width = 1.0;
  for (int expand = 0; expand <= 10; ++expand) {
    const double a = guess - width;
    const double b = guess + width;
    double ra = residual(a);
    double rb = residual(b);
    if (std::isfinite(ra) && std::isfinite(rb) &&
        std::signbit(ra) != std::signbit(rb)) {
      double lo = a, hi = b, rlo = ra;
      double mid = lo, rm = ra;
      for (int it = 0; it < 200; ++it) {
        mid = 0.5 * (lo + hi);
        rm = residual(mid);
        trace.push_back({mid, rm});
        if (!std::isfinite(rm)) break;
        if (std::abs(rm) <= target || hi - lo <= 1e-16 * (1.0 + std::abs(mid))) {
          rep.root = mid;
          rep.iterations = cfg.max_iters + it;
          rep.residual = rm;
          return rep;
        }
        if (std::signbit(rm) == std::signbit(rlo)) {
          lo = mid;
          rlo = rm;
        } else {
          hi = mid;
        }
      }
      // Interval collapsed without meeting the residual target: accept the
      // midpoint only if it actually improved on Newton's best point.
      if (std::isfinite(rm) && std::abs(rm) <= target) {
        rep.root = mid;
        rep.residual = rm;
        rep.iterations = cfg.max_iters + 200;
        return rep;
      }
      break;
    }
    width *= 2.0;
  }
  (void)best_x;
  (void)best_r;
  throw MultiplierFailure(
      trace_message("scalar multiplier iteration failed to converge", trace),
      std::move(trace));
}

MultiplierSolveReport newton_2d(
    const std::function<double(double, double)>& r1,
    const std::function<double(double, double)>& r2,
    const std::function<std::array<double, 4>(double, double)>& jacobian,
    std::pair<double, double> guess, const NewtonConfig& cfg) {
  std::vector<MultiplierFailure::TracePoint> trace;
  double x = guess.first, y = guess.second;
  double f = r1(x, y), g = r2(x, y);
  if (!std::isfinite(f) || !std::isfinite(g)) {
    throw MultiplierFailure("2d residual not finite at initial guess",
                            {{x, f}, {y, g}});
  }
  const double target =
      cfg.abs_tol + cfg.rel_tol * std::max(std::abs(f), std::abs(g));

  MultiplierSolveReport rep;
  rep.predictor_used = guess.second;

  for (int it = 0; it <= cfg.max_iters; ++it) {
    const double rnorm = std::max(std::abs(f), std::abs(g));
    trace.push_back({x, f});
    trace.push_back({y, g});
    if (rnorm <= target) {
      rep.root = x;
      rep.root2 = y;
      rep.iterations = it;
      rep.residual = rnorm;
      return rep;
    }
    if (it == cfg.max_iters) break;

    std::array<double, 4> J;
    if (jacobian) {
      J = jacobian(x, y);
    } else {
      const double hx = cfg.fd_step * (1.0 + std::abs(x));
      const double hy = cfg.fd_step * (1.0 + std::abs(y));
      J[0] = (r1(x + hx, y) - r1(x - hx, y)) / (2.0 * hx);
      J[1] = (r1(x, y + hy) - r1(x, y - hy)) / (2.0 * hy);
      J[2] = (r2(x + hx, y) - r2(x - hx, y)) / (2.0 * hx);
      J[3] = (r2(x, y + hy) - r2(x, y - hy)) / (2.0 * hy);
    }
    const double det = J[0] * J[3] - J[1] * J[2];
    const double scale = std::abs(J[0] * J[3]) + std::abs(J[1] * J[2]);
    if (!std::isfinite(det) || std::abs(det) < 1e-14 * std::max(scale, 1e-300)) {
      throw MultiplierFailure(
          trace_message("singular Jacobian in 2d multiplier solve", trace),
          std::move(trace));
    }
    const double dx = (f * J[3] - g * J[1]) / det;
    const double dy = (g * J[0] - f * J[2]) / det;
    // Backtracking line search: halve the step while the residual grows.
    double alpha = 1.0;
    double xn = x, yn = y, fn = f, gn = g;
    for (int cut = 0; cut < 5; ++cut) {
      xn = x - alpha * dx;
      yn = y - alpha * dy;
      fn = r1(xn, yn);
      gn = r2(xn, yn);
      if (std::isfinite(fn) && std::isfinite(gn) &&
          std::max(std::abs(fn), std::abs(gn)) < rnorm) {
        break;
      }
      alpha *= 0.5;
    }
    x = xn;
    y = yn;
    f = fn;
    g = gn;
    if (!std::isfinite(f) || !std::isfinite(g)) {
      trace.push_back({x, f});
      throw MultiplierFailure(
          trace_message("2d multiplier iteration left the finite range", trace),
          std::move(trace));
    }
  }
  throw MultiplierFailure(
      trace_message("2d multiplier iteration failed to converge", trace),
      std::move(trace));
}

double solve_constraint_quadratic(double a, double b, double c,
                                  double predictor) {
  const double scale = std::max({std::abs(a), std::abs(b), std::abs(c)});
  if (scale == 0.0) {
    throw MultiplierFailure("degenerate constraint quadratic (a=b=c=0)", {});
  }
  if (std::abs(a) <= 1e-14 * scale) {
    if (std::abs(b) <= 1e-14 * scale) {
      throw MultiplierFailure("degenerate constraint quadratic (a=b=0)", {});
    }
    return -c / b;
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) {
    std::ostringstream msg;
    msg << "constraint quadratic has no real root (discriminant "
        << disc / (scale * scale) << " after scaling); constraint unreachable "
        << "at this time step";
    throw MultiplierFailure(msg.str(), {{predictor, disc}});
  }
  const double sq = std::sqrt(disc);
  // Stable split: q has the sign of -b.
  const double q = -0.5 * (b + (b >= 0.0 ? sq : -sq));
  double r1, r2;
  if (q != 0.0) {
    r1 = q / a;
    r2 = c / q;
  } else {
    r1 = 0.0;
    r2 = 0.0;
  }
  return std::abs(r1 - predictor) <= std::abs(r2 - predictor) ? r1 : r2;
}

}  // namespace cgflow
