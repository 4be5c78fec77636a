#include "cgflow/models.hpp"

#include <cmath>

namespace cgflow {

double double_well(double s) {
  const double t = s * s - 1.0;
  return 0.25 * t * t;
}
double double_well_prime(double s) { return s * s * s - s; }
double double_well_second(double s) { return 3.0 * s * s - 1.0; }

GenericModel GenericModel::allen_cahn(const Grid& g, double mobility) {
  GenericModel m;
  m.linear_op = laplacian_op(g, -1.0);
  m.mobility_op = identity_op(g, mobility);
  return m;
}

GenericModel GenericModel::cahn_hilliard(const Grid& g, double mobility) {
  GenericModel m;
  m.linear_op = laplacian_op(g, -1.0);
  m.mobility_op = laplacian_op(g, -mobility);
  return m;
}

double generic_energy(const GenericModel& m, const RealField& phi) {
  const RealField lphi = apply_operator(m.linear_op, phi);
  return 0.5 * inner(lphi, phi) + integrate(map(phi, m.F));
}

double generic_modified_energy(const GenericModel& m, const RealField& phi,
                               double r) {
  const RealField lphi = apply_operator(m.linear_op, phi);
  return 0.5 * inner(lphi, phi) + r * r;
}

double sav_r_value(const GenericModel& m, const RealField& phi) {
  const double arg = integrate(map(phi, m.F)) + m.C0;
  if (!(arg > 0.0)) {
    throw PositivityError("int F(phi) + C0 is not positive (" +
                          std::to_string(arg) + "); raise C0");
  }
  return std::sqrt(arg);
}

double constraint_value(const GenericModel& m, const RealField& phi) {
  return integrate(map(phi, m.h));
}

RealField constraint_derivative(const GenericModel& m, const RealField& phi) {
  return map(phi, m.hp);
}

double vesicle_bending_energy(const VesicleModel& m, const RealField& phi) {
  const double inv_eps2 = 1.0 / (m.epsilon * m.epsilon);
  RealField w = laplacian_of(phi);
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = -w[i] + inv_eps2 * double_well_prime(phi[i]);
  }
  return 0.5 * m.epsilon * l2_norm_sq(w);
}

RealField vesicle_Q_density(const VesicleModel& m, const RealField& phi) {
  const double eps = m.epsilon;
  const RealField gsq = gradient_squared(phi);
  RealField q(phi.grid());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double g = double_well_prime(phi[i]);
    q[i] = 0.5 * eps *
           (6.0 / (eps * eps) * phi[i] * phi[i] * gsq[i] +
            g * g / (eps * eps * eps * eps) - 2.0 / (eps * eps) * gsq[i]);
  }
  return q;
}

double vesicle_Q_energy(const VesicleModel& m, const RealField& phi) {
  return integrate(vesicle_Q_density(m, phi));
}

RealField vesicle_dQ_dphi(const VesicleModel& m, const RealField& phi) {
  const double eps = m.epsilon;
  const Grid& g = phi.grid();
  const RealField gsq = gradient_squared(phi);

  // div(phi^2 grad phi), all derivatives spectral.
  std::vector<RealField> flux;
  flux.reserve(static_cast<std::size_t>(g.dims));
  const RealField phi2 = multiply(phi, phi);
  for (int a = 0; a < g.dims; ++a) {
    flux.push_back(multiply(phi2, derivative(phi, a)));
  }
  const RealField div_flux = divergence(flux);
  const RealField lap = laplacian_of(phi);

  RealField out(g);
  const double c1 = 6.0 / eps;         // (eps/2) * 12/eps^2
  const double c2 = 1.0 / (eps * eps * eps);  // (eps/2) * 2/eps^4
  const double c3 = 2.0 / eps;         // (eps/2) * 4/eps^2
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double G = double_well_prime(phi[i]);
    const double Gp = double_well_second(phi[i]);
    out[i] = c1 * (phi[i] * gsq[i] - div_flux[i]) + c2 * G * Gp + c3 * lap[i];
  }
  return out;
}

std::pair<double, double> vesicle_constraints(const VesicleModel& m,
                                              const RealField& phi) {
  const double A = integrate(phi);
  const RealField gsq = gradient_squared(phi);
  RealField h(phi.grid());
  for (std::size_t i = 0; i < h.size(); ++i) {
    h[i] = 0.5 * m.epsilon * gsq[i] + double_well(phi[i]) / m.epsilon;
  }
  return {A, integrate(h)};
}

RealField vesicle_dH_dphi(const VesicleModel& m, const RealField& phi) {
  RealField out = laplacian_of(phi);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = -m.epsilon * out[i] + double_well_prime(phi[i]) / m.epsilon;
  }
  return out;
}

namespace {
void check_components(const PartitionModel& m,
                      const std::vector<RealField>& phis) {
  if (static_cast<int>(phis.size()) != m.m) {
    throw Error("partition model expects " + std::to_string(m.m) +
                " components, got " + std::to_string(phis.size()));
  }
  for (const auto& p : phis) {
    require_same_grid(p.grid(), phis[0].grid(), "partition components");
  }
}
}  // namespace

RealField partition_interaction_density(const PartitionModel& m,
                                        const std::vector<RealField>& phis) {
  check_components(m, phis);
  RealField density(phis[0].grid());
  const double inv_eps2 = 1.0 / (m.epsilon * m.epsilon);
  for (int i = 0; i < m.m; ++i) {
    for (int j = 0; j < i; ++j) {
      for (std::size_t p = 0; p < density.size(); ++p) {
        const double a = phis[static_cast<std::size_t>(i)][p];
        const double b = phis[static_cast<std::size_t>(j)][p];
        density[p] += inv_eps2 * a * a * b * b;
      }
    }
  }
  return density;
}

double partition_interaction(const PartitionModel& m,
                             const std::vector<RealField>& phis) {
  return integrate(partition_interaction_density(m, phis));
}

RealField partition_dF_dphi(const PartitionModel& m,
                            const std::vector<RealField>& phis, int j) {
  check_components(m, phis);
  if (j < 1 || j > m.m) throw Error("partition component index out of range");
  const std::size_t jj = static_cast<std::size_t>(j - 1);
  RealField sum_sq(phis[0].grid());
  for (std::size_t i = 0; i < phis.size(); ++i) {
    if (i == jj) continue;
    for (std::size_t p = 0; p < sum_sq.size(); ++p) {
      sum_sq[p] += phis[i][p] * phis[i][p];
    }
  }
  RealField out(phis[0].grid());
  const double c = 2.0 / (m.epsilon * m.epsilon);
  for (std::size_t p = 0; p < out.size(); ++p) {
    out[p] = c * phis[jj][p] * sum_sq[p];
  }
  return out;
}

double integrate_difference(const RealField& a, const RealField& b,
                            const ScalarFn& f) {
  require_same_grid(a.grid(), b.grid(), "integrate_difference");
  KahanAccumulator acc;
  for (std::size_t i = 0; i < a.size(); ++i) acc.add(f(a[i]) - f(b[i]));
  return acc.sum() * a.grid().cell_volume();
}

double partition_energy(const PartitionModel& m,
                        const std::vector<RealField>& phis) {
  check_components(m, phis);
  double e = partition_interaction(m, phis);
  for (const auto& p : phis) e += 0.5 * integrate(gradient_squared(p));
  return e;
}

}  // namespace cgflow
