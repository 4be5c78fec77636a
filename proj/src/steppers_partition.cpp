#include <cmath>

#include "cgflow/parallel.hpp"
#include "cgflow/steppers.hpp"

namespace cgflow {
namespace {

struct BdfWeights {
  double c_new, c_n, c_nm1, denom;
};

NewtonConfig tol_for(double scale) {
  NewtonConfig cfg;
  cfg.rel_tol = 1e-12;
  cfg.abs_tol = 1e-12 * (1.0 + std::abs(scale));
  return cfg;
}

}  // namespace

SchemeState make_partition_state(const PartitionModel& m,
                                 std::vector<RealField> phi0, double dt) {
  if (!(dt > 0.0)) throw Error("dt must be positive");
  if (static_cast<int>(phi0.size()) != m.m) {
    throw Error("partition state needs one field per component");
  }
  SchemeState s;
  s.dt = dt;
  for (const auto& p : phi0) s.norm_targets.push_back(l2_norm_sq(p));
  s.phi_n = std::move(phi0);
  s.lambda_prev.assign(static_cast<std::size_t>(m.m), 0.0);
  return s;
}

StepResult step_partition_bdf2(const SchemeState& s, const PartitionModel& m) {
  if (static_cast<int>(s.phi_n.size()) != m.m) {
    throw Error("partition scheme: state component count mismatch");
  }
  if (!(s.dt > 0.0)) throw Error("state.dt must be positive");
  const bool first = s.phi_nm1.empty();
  const BdfWeights w = first ? BdfWeights{1.0, -1.0, 0.0, s.dt}
                             : BdfWeights{3.0, -4.0, 1.0, 2.0 * s.dt};
  const double lead = w.c_new / w.denom;
  const std::size_t mm = s.phi_n.size();
  const auto& phi_n = s.phi_n;
  const auto& phi_nm1 = first ? s.phi_n : s.phi_nm1;

  // Extrapolated interaction derivatives and fields.
  std::vector<RealField> f_star(mm), phi_star(mm);
  for (std::size_t j = 0; j < mm; ++j) {
    const RealField f_n = partition_dF_dphi(m, phi_n, static_cast<int>(j) + 1);
    f_star[j] = first ? f_n
                      : combine(2.0, f_n, -1.0,
                                partition_dF_dphi(m, phi_nm1,
                                                  static_cast<int>(j) + 1));
    phi_star[j] = first ? phi_n[j] : combine(2.0, phi_n[j], -1.0, phi_nm1[j]);
  }

  // Three decoupled constant-coefficient solves per component.
  std::vector<RealField> psi0(mm), psi1(mm), psi2(mm);
  {
    std::vector<std::function<void()>> tasks;
    for (std::size_t j = 0; j < mm; ++j) {
      tasks.push_back([&, j] {
        const RealField hist = combine(-w.c_n / w.denom, phi_n[j],
                                       -w.c_nm1 / w.denom, phi_nm1[j]);
        psi0[j] = solve_const_coeff(lead, -1.0, 0.0, hist);
        psi1[j] = solve_const_coeff(lead, -1.0, 0.0, phi_star[j]);
        psi2[j] = solve_const_coeff(lead, -1.0, 0.0, -1.0 * f_star[j]);
      });
    }
    parallel_invoke(std::move(tasks));
  }

  // Per-component lambda from the surrogate norm constraint (a quadratic).
  std::vector<double> lambda(mm, 0.0);
  std::vector<RealField> surrogate(mm);
  for (std::size_t j = 0; j < mm; ++j) {
    const RealField base = psi0[j] + psi2[j];
    const double a = l2_norm_sq(psi1[j]);
    const double b = 2.0 * inner(psi1[j], base);
    const double cq = l2_norm_sq(base) - s.norm_targets[j];
    const double pred = s.lambda_prev.size() == mm ? s.lambda_prev[j] : 0.0;
    lambda[j] = solve_constraint_quadratic(a, b, cq, pred);
    surrogate[j] = base;
    surrogate[j].axpy(lambda[j], psi1[j]);
  }

  // Global eta from the discrete interaction-energy relation.
  auto phi_of = [&](double eta) {
    std::vector<RealField> out(mm);
    for (std::size_t j = 0; j < mm; ++j) {
      out[j] = psi0[j];
      out[j].axpy(lambda[j], psi1[j]);
      out[j].axpy(eta, psi2[j]);
    }
    return out;
  };
  const RealField fdens_n = partition_interaction_density(m, phi_n);
  const double F_n = integrate(fdens_n);
  const double dF_hist =
      first ? 0.0
            : integrate(fdens_n - partition_interaction_density(m, phi_nm1));
  auto comb_j = [&](const RealField& f_new, std::size_t j) {
    return combine(w.c_new, f_new, w.c_n, phi_n[j], w.c_nm1, phi_nm1[j]);
  };
  // Interaction increments are integrated from pointwise density differences
  // so the eta relation stays resolvable when the dynamics are slow.
  auto residual = [&](double eta) {
    const auto cand = phi_of(eta);
    double r = w.c_new *
                   integrate(partition_interaction_density(m, cand) - fdens_n) -
               w.c_nm1 * dF_hist;
    for (std::size_t j = 0; j < mm; ++j) {
      const RealField cj = comb_j(cand[j], j);
      r -= eta * inner(f_star[j], cj);
      r -= lambda[j] * inner(phi_star[j], cj);
    }
    return r;
  };
  auto derivative = [&](double eta) {
    const auto cand = phi_of(eta);
    double d = 0.0;
    for (std::size_t j = 0; j < mm; ++j) {
      const RealField cj = comb_j(cand[j], j);
      d += w.c_new *
           inner(partition_dF_dphi(m, cand, static_cast<int>(j) + 1), psi2[j]);
      d -= inner(f_star[j], cj) + eta * w.c_new * inner(f_star[j], psi2[j]);
      d -= lambda[j] * w.c_new * inner(phi_star[j], psi2[j]);
    }
    return d;
  };
  // When components barely overlap the interaction derivatives vanish, eta
  // multiplies (numerically) nothing, and the relation cannot absorb the
  // O(dt^2) residual of the added norm-tangency term; the consistent value is
  // then eta = 1, which also has no effect on the fields.
  double eta = 1.0;
  int iters = 0;
  if (m.m > 1) {
    NewtonConfig eta_cfg = tol_for(1.0 + std::abs(F_n));
    eta_cfg.max_iters = 12;
    eta_cfg.bisection_fallback = false;
    try {
      const auto rep = newton_scalar(residual, derivative, 1.0, eta_cfg);
      if (std::abs(rep.root - 1.0) <= 0.25) {
        eta = rep.root;
        iters = rep.iterations;
      }
    } catch (const MultiplierFailure&) {
      eta = 1.0;
    }
  }

  std::vector<RealField> phi_new = phi_of(eta);
  for (const auto& f : phi_new) {
    if (!all_finite(f)) {
      throw Error("partition_bdf2: non-finite field values produced");
    }
  }

  StepReport rep;
  rep.lambda = lambda;
  rep.eta = eta;
  rep.newton_iters = iters;
  rep.energy_original = partition_energy(m, phi_new);
  double grad_part = 0.0;
  double dissipation = 0.0;
  for (std::size_t j = 0; j < mm; ++j) {
    grad_part += 0.25 * (integrate(gradient_squared(phi_new[j])) +
                         integrate(gradient_squared(
                             combine(2.0, phi_new[j], -1.0, phi_n[j]))));
    const RealField mu = (-1.0 / w.denom) * comb_j(phi_new[j], j);
    dissipation -= s.dt * l2_norm_sq(mu);
  }
  rep.energy_discrete =
      grad_part + 0.5 * (3.0 * partition_interaction(m, phi_new) - F_n);
  rep.dissipation = dissipation;
  for (std::size_t j = 0; j < mm; ++j) {
    rep.constraint_residuals.push_back(l2_norm_sq(surrogate[j]) -
                                       s.norm_targets[j]);
  }
  for (std::size_t j = 0; j < mm; ++j) {
    rep.constraint_residuals.push_back(l2_norm_sq(phi_new[j]) -
                                       s.norm_targets[j]);
  }
  rep.surrogate_fields = std::move(surrogate);

  SchemeState n = s;
  n.phi_nm1 = s.phi_n;
  n.phi_n = std::move(phi_new);
  n.step = s.step + 1;
  n.t = s.t + s.dt;
  n.lambda_prev = lambda;
  n.eta_prev = eta;
  return {std::move(n), rep};
}

StepResult bootstrap_first_step(const SchemeState& s, const PartitionModel& m) {
  if (s.step != 0) throw Error("bootstrap requires step == 0");
  return step_partition_bdf2(s, m);
}

}  // namespace cgflow
