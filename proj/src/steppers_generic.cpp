#include <cmath>

#include "cgflow/steppers.hpp"

namespace cgflow {
namespace {

void require_scalar_state(const SchemeState& s) {
  if (s.phi_n.size() != 1) {
    throw Error("scalar scheme invoked on a multi-component state");
  }
  if (!(s.dt > 0.0)) throw Error("state.dt must be positive");
}

void check_finite(const RealField& f, const char* scheme) {
  if (!all_finite(f)) {
    throw Error(std::string(scheme) + ": non-finite field values produced");
  }
}

NewtonConfig constraint_tol(double target_scale) {
  NewtonConfig cfg;
  cfg.rel_tol = 1e-12;
  cfg.abs_tol = 1e-12 * (1.0 + std::abs(target_scale));
  return cfg;
}

// Split solutions of the first-order SAV step: the constraint-free branch
// (phi1, r1) and the unit-multiplier branch (phi2, r2), each obtained by
// block elimination of the scalar r and two constant-coefficient solves.
struct SavSplit {
  RealField phi1, phi2;
  double r1 = 0.0, r2 = 0.0;
  RealField b;  // F'(phi^n) / sqrt(int F(phi^n) + C0)
  RealField d;  // h'(phi^n)
  double Rn = 0.0;
  bool constrained = false;
};

SavSplit sav_split(const SchemeState& s, const GenericModel& m, double dt) {
  const RealField& phi = s.phi();
  if (!s.r_n) throw Error("SAV scheme requires r_n in the state");
  SavSplit out;
  out.Rn = sav_r_value(m, phi);
  out.b = (1.0 / out.Rn) * map(phi, m.Fp);
  out.d = constraint_derivative(m, phi);
  out.constrained = max_abs(out.d) > 0.0;

  const SpectralOperator S = shift(dt * (m.mobility_op * m.linear_op), 1.0);
  const RealField p = solve_operator(S, phi);
  const RealField q =
      solve_operator(S, (-dt) * apply_operator(m.mobility_op, out.b));
  const double denom = 1.0 - 0.5 * inner(out.b, q);
  out.r1 = (*s.r_n + 0.5 * inner(out.b, p - phi)) / denom;
  out.phi1 = p;
  out.phi1.axpy(out.r1, q);

  if (out.constrained) {
    const RealField sf =
        solve_operator(S, dt * apply_operator(m.mobility_op, out.d));
    out.r2 = 0.5 * inner(out.b, sf) / denom;
    out.phi2 = sf;
    out.phi2.axpy(out.r2, q);
  } else {
    out.phi2 = RealField(phi.grid());
  }
  return out;
}

double linear_lambda(const SavSplit& sp, const RealField& phi_n) {
  const double den = inner(sp.d, sp.phi2);
  const double scale =
      std::sqrt(l2_norm_sq(sp.d) * l2_norm_sq(sp.phi2));
  if (std::abs(den) < 1e-14 * scale || scale == 0.0) {
    throw DegeneratePredictorError(
        "linear-SAV lambda denominator (h'(phi^n), phi2) is degenerate");
  }
  return -inner(sp.d, sp.phi1 - phi_n) / den;
}

SchemeState advance_scalar(const SchemeState& s, RealField phi_new,
                           std::optional<double> r_new, double lambda,
                           double eta, double gamma) {
  SchemeState n = s;
  n.phi_nm1 = s.phi_n;
  n.phi_n = {std::move(phi_new)};
  n.r_nm1 = s.r_n;
  n.r_n = r_new;
  n.step = s.step + 1;
  n.t = s.t + s.dt;
  n.lambda_prev = {lambda};
  n.eta_prev = eta;
  n.gamma_prev = gamma;
  return n;
}

StepResult sav_step_impl(const SchemeState& s, const GenericModel& m,
                         bool exact_constraint) {
  require_scalar_state(s);
  const RealField& phi = s.phi();
  const double dt = s.dt;
  const SavSplit sp = sav_split(s, m, dt);

  double lambda = 0.0;
  int iters = 0;
  if (sp.constrained) {
    double predictor;
    try {
      predictor = linear_lambda(sp, phi);
    } catch (const DegeneratePredictorError&) {
      if (!exact_constraint) throw;
      predictor = s.lambda_prev.empty() ? 0.0 : s.lambda_prev[0];
    }
    if (exact_constraint) {
      const double target = s.H0;
      auto residual = [&](double lam) {
        RealField cand = sp.phi1;
        cand.axpy(lam, sp.phi2);
        return integrate(map(cand, m.h)) - target;
      };
      auto derivative = [&](double lam) {
        RealField cand = sp.phi1;
        cand.axpy(lam, sp.phi2);
        return inner(map(cand, m.hp), sp.phi2);
      };
      const auto rep =
          newton_scalar(residual, derivative, predictor, constraint_tol(target));
      lambda = rep.root;
      iters = rep.iterations;
    } else {
      lambda = predictor;
    }
  }

  RealField phi_new = sp.phi1;
  if (sp.constrained) phi_new.axpy(lambda, sp.phi2);
  const double r_new = sp.r1 + lambda * sp.r2;
  check_finite(phi_new, exact_constraint ? "approach1" : "linear_sav");

  // mu^{n+1} reconstructed from the scheme's chemical-potential equation.
  RealField mu = apply_operator(m.linear_op, phi_new);
  mu.axpy(r_new, sp.b);
  if (sp.constrained) mu.axpy(-lambda, sp.d);

  StepReport rep;
  rep.lambda = {lambda};
  rep.newton_iters = iters;
  rep.energy_original = generic_energy(m, phi_new);
  rep.energy_discrete = generic_modified_energy(m, phi_new, r_new);
  rep.dissipation = -dt * inner(apply_operator(m.mobility_op, mu), mu);
  rep.constraint_residuals = {constraint_value(m, phi_new) - s.H0};
  if (!exact_constraint) {
    rep.tangency_residual = inner(sp.d, phi_new - phi);
  }
  return {advance_scalar(s, std::move(phi_new), r_new, lambda, 1.0, 0.0), rep};
}

// Crank-Nicolson machinery shared by approaches 2/3 and the stabilized
// variant.  phi^{n+1} = phi1 + eta*phi2 + lambda*phi3.
struct CnSplit {
  RealField phi1, phi2, phi3;
  RealField fp_star;  // F'(phi^{*,n+1/2})
  RealField d_star;   // extrapolated constraint derivative
  double F_n = 0.0;   // int F(phi^n)
  bool constrained = false;
};

CnSplit cn_split(const SchemeState& s, const GenericModel& m,
                 const StabilizationParams& stab) {
  const RealField& phi_n = s.phi_n[0];
  const RealField& phi_nm1 = s.phi_nm1[0];
  const double dt = s.dt;
  CnSplit out;

  const RealField phi_star = combine(1.5, phi_n, -0.5, phi_nm1);
  out.fp_star = map(phi_star, m.Fp);
  out.d_star = combine(1.5, constraint_derivative(m, phi_n), -0.5,
                       constraint_derivative(m, phi_nm1));
  out.F_n = integrate(map(phi_n, m.F));
  out.constrained = max_abs(out.d_star) > 0.0;

  const bool has_stab = stab.eps1 != 0.0 || stab.eps2 != 0.0;
  SpectralOperator implicit_part = 0.5 * m.linear_op;
  if (has_stab) {
    const double inv_dt2 = 1.0 / (dt * dt);
    implicit_part = implicit_part +
                    shift(stab.eps2 * inv_dt2 * m.linear_op, stab.eps1 * inv_dt2);
  }
  const SpectralOperator S =
      shift(m.mobility_op * implicit_part, 1.0 / dt);

  RealField explicit_part = 0.5 * apply_operator(m.linear_op, phi_n);
  if (has_stab) {
    const double inv_dt2 = 1.0 / (dt * dt);
    const RealField second_diff = combine(1.0, phi_nm1, -2.0, phi_n);
    explicit_part.axpy(stab.eps1 * inv_dt2, second_diff);
    explicit_part.axpy(stab.eps2 * inv_dt2,
                       apply_operator(m.linear_op, second_diff));
  }
  RealField rhs1 = (1.0 / dt) * phi_n;
  rhs1 -= apply_operator(m.mobility_op, explicit_part);
  out.phi1 = solve_operator(S, rhs1);
  out.phi2 =
      solve_operator(S, -1.0 * apply_operator(m.mobility_op, out.fp_star));
  out.phi3 = out.constrained
                 ? solve_operator(S, apply_operator(m.mobility_op, out.d_star))
                 : RealField(phi_n.grid());
  return out;
}

enum class CnMode { kCoupled, kSequential };

StepResult cn_step_impl(const SchemeState& s, const GenericModel& m,
                        const StabilizationParams& stab, CnMode mode,
                        const char* name) {
  require_scalar_state(s);
  if (s.phi_nm1.empty()) {
    // Multistep history not yet available: take the matching first-order
    // exact-constraint step.
    return step_approach1(s, m);
  }
  const RealField& phi_n = s.phi_n[0];
  const double dt = s.dt;
  const CnSplit sp = cn_split(s, m, stab);

  auto phi_of = [&](double eta, double lambda) {
    RealField f = sp.phi1;
    f.axpy(eta, sp.phi2);
    if (sp.constrained) f.axpy(lambda, sp.phi3);
    return f;
  };
  // Residual of the discrete energy equation (the eta relation).  The
  // F-increment is integrated from pointwise differences: differencing two
  // large integrals would leave a roundoff floor that the near-degenerate
  // multiplier equations amplify.
  auto energy_residual = [&](const RealField& cand, double eta, double lambda) {
    const RealField diff = cand - phi_n;
    double r = integrate_difference(cand, phi_n, m.F) -
               eta * inner(sp.fp_star, diff);
    if (sp.constrained) r += lambda * inner(sp.d_star, diff);
    return r;
  };

  double predictor = s.lambda_prev.empty() ? 0.0 : s.lambda_prev[0];
  if (sp.constrained) {
    const double den = inner(sp.d_star, sp.phi3);
    const double scale = std::sqrt(l2_norm_sq(sp.d_star) * l2_norm_sq(sp.phi3));
    if (std::abs(den) >= 1e-14 * scale && scale > 0.0) {
      predictor = -inner(sp.d_star, sp.phi1 + sp.phi2 - phi_n) / den;
    }
  }

  double eta = 1.0, lambda = 0.0;
  int iters = 0;
  const double h_scale = 1.0 + std::abs(s.H0);
  const double e_scale = 1.0 + std::abs(sp.F_n);

  if (!sp.constrained) {
    auto res = [&](double e) { return energy_residual(phi_of(e, 0.0), e, 0.0); };
    auto der = [&](double e) {
      const RealField cand = phi_of(e, 0.0);
      return inner(map(cand, m.Fp), sp.phi2) -
             inner(sp.fp_star, cand - phi_n) - e * inner(sp.fp_star, sp.phi2);
    };
    const auto rep = newton_scalar(res, der, 1.0, constraint_tol(e_scale));
    eta = rep.root;
    iters = rep.iterations;
  } else if (mode == CnMode::kCoupled) {
    auto r1 = [&](double e, double l) {
      return integrate(map(phi_of(e, l), m.h)) - s.H0;
    };
    auto r2 = [&](double e, double l) {
      return energy_residual(phi_of(e, l), e, l);
    };
    auto jac = [&](double e, double l) -> std::array<double, 4> {
      const RealField cand = phi_of(e, l);
      const RealField diff = cand - phi_n;
      const RealField hp = map(cand, m.hp);
      const RealField fp = map(cand, m.Fp);
      const double j11 = inner(hp, sp.phi2);
      const double j12 = inner(hp, sp.phi3);
      const double j21 = inner(fp, sp.phi2) - inner(sp.fp_star, diff) -
                         e * inner(sp.fp_star, sp.phi2) +
                         l * inner(sp.d_star, sp.phi2);
      const double j22 = inner(fp, sp.phi3) - e * inner(sp.fp_star, sp.phi3) +
                         l * inner(sp.d_star, sp.phi3) +
                         inner(sp.d_star, diff);
      return {j11, j12, j21, j22};
    };
    const auto rep = newton_2d(r1, r2, jac, {1.0, predictor},
                               constraint_tol(std::max(h_scale, e_scale)));
    eta = rep.root;
    lambda = rep.root2;
    iters = rep.iterations;
  } else {
    // Sequential: lambda from the eta-independent surrogate, then eta.
    auto g = [&](double l) { return integrate(map(phi_of(1.0, l), m.h)) - s.H0; };
    auto gp = [&](double l) {
      return inner(map(phi_of(1.0, l), m.hp), sp.phi3);
    };
    const auto lam_rep = newton_scalar(g, gp, predictor, constraint_tol(h_scale));
    lambda = lam_rep.root;
    auto res = [&](double e) {
      return energy_residual(phi_of(e, lambda), e, lambda);
    };
    auto der = [&](double e) {
      const RealField cand = phi_of(e, lambda);
      return inner(map(cand, m.Fp), sp.phi2) -
             inner(sp.fp_star, cand - phi_n) -
             e * inner(sp.fp_star, sp.phi2) +
             lambda * inner(sp.d_star, sp.phi2);
    };
    const auto eta_rep = newton_scalar(res, der, 1.0, constraint_tol(e_scale));
    eta = eta_rep.root;
    iters = lam_rep.iterations + eta_rep.iterations;
  }

  RealField phi_new = phi_of(eta, lambda);
  check_finite(phi_new, name);

  // mu^{n+1/2} from the scheme equation; the stabilization terms belong to it.
  RealField mu = apply_operator(m.linear_op, combine(0.5, phi_new, 0.5, phi_n));
  if (stab.eps1 != 0.0 || stab.eps2 != 0.0) {
    const double inv_dt2 = 1.0 / (dt * dt);
    const RealField second_diff =
        combine(1.0, phi_new, -2.0, phi_n) + s.phi_nm1[0];
    mu.axpy(stab.eps1 * inv_dt2, second_diff);
    mu.axpy(stab.eps2 * inv_dt2, apply_operator(m.linear_op, second_diff));
  }
  mu.axpy(eta, sp.fp_star);
  if (sp.constrained) mu.axpy(-lambda, sp.d_star);

  StepReport rep;
  rep.lambda = {lambda};
  rep.eta = eta;
  rep.newton_iters = iters;
  rep.energy_original = generic_energy(m, phi_new);
  rep.dissipation = -dt * inner(apply_operator(m.mobility_op, mu), mu);

  const double e_prev = generic_energy(m, s.phi_n[0]);
  if (stab.eps1 == 0.0 && stab.eps2 == 0.0) {
    rep.energy_discrete = rep.energy_original;
    rep.dissipation_residual =
        (rep.energy_original - e_prev) - rep.dissipation;
  } else {
    const RealField u = (1.0 / dt) * (phi_new - phi_n);
    rep.energy_discrete =
        rep.energy_original + 0.5 * stab.eps1 * l2_norm_sq(u) +
        0.5 * stab.eps2 * inner(apply_operator(m.linear_op, u), u);
  }

  rep.constraint_residuals = {constraint_value(m, phi_new) - s.H0};
  if (mode == CnMode::kSequential && sp.constrained) {
    RealField surrogate = phi_of(1.0, lambda);
    // Enforced-field residual first, raw-field residual second.
    rep.constraint_residuals = {constraint_value(m, surrogate) - s.H0,
                                constraint_value(m, phi_new) - s.H0};
    rep.surrogate_fields.push_back(std::move(surrogate));
  }
  return {advance_scalar(s, std::move(phi_new), s.r_n, lambda, eta, 0.0), rep};
}

}  // namespace

SchemeState make_generic_state(const GenericModel& m, RealField phi0,
                               double dt) {
  if (!(dt > 0.0)) throw Error("dt must be positive");
  SchemeState s;
  s.H0 = constraint_value(m, phi0);
  s.A0 = integrate(phi0);
  s.r_n = sav_r_value(m, phi0);
  s.dt = dt;
  s.phi_n.push_back(std::move(phi0));
  s.lambda_prev = {0.0};
  return s;
}

StepResult step_linear_sav(const SchemeState& s, const GenericModel& m) {
  return sav_step_impl(s, m, /*exact_constraint=*/false);
}

StepResult step_approach1(const SchemeState& s, const GenericModel& m) {
  return sav_step_impl(s, m, /*exact_constraint=*/true);
}

StepResult step_approach2_cn(const SchemeState& s, const GenericModel& m) {
  return cn_step_impl(s, m, {}, CnMode::kCoupled, "approach2");
}

StepResult step_approach3_cn(const SchemeState& s, const GenericModel& m) {
  return cn_step_impl(s, m, {}, CnMode::kSequential, "approach3");
}

StepResult step_stabilized_cn(const SchemeState& s, const GenericModel& m,
                              const StabilizationParams& stab) {
  if (stab.eps1 < 0.0 || stab.eps2 < 0.0) {
    throw Error("stabilization constants must be nonnegative");
  }
  return cn_step_impl(s, m, stab, CnMode::kCoupled, "stabilized");
}

StepResult bootstrap_first_step(const SchemeState& s, const GenericModel& m,
                                SchemeKind kind) {
  if (s.step != 0) throw Error("bootstrap requires step == 0");
  switch (kind) {
    case SchemeKind::kLinearSav:
      return step_linear_sav(s, m);
    case SchemeKind::kApproach1:
    case SchemeKind::kApproach2Cn:
    case SchemeKind::kApproach3Cn:
    case SchemeKind::kStabilizedCn:
      return step_approach1(s, m);
    default:
      throw Error("bootstrap: scheme kind does not match a generic model");
  }
}

double lambda_predictor_linear_sav(const SchemeState& state,
                                   const GenericModel& model, double dt) {
  if (state.phi_n.size() != 1) {
    throw Error("lambda predictor expects a scalar state");
  }
  const SavSplit sp = sav_split(state, model, dt);
  if (!sp.constrained) {
    throw DegeneratePredictorError(
        "lambda predictor: constraint derivative vanishes identically");
  }
  return linear_lambda(sp, state.phi());
}

}  // namespace cgflow
