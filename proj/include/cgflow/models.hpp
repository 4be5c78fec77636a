#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cgflow/spectral.hpp"

namespace cgflow {

using ScalarFn = std::function<double(double)>;

// Standard double well F = (s^2-1)^2/4 and its derivatives.
double double_well(double s);
double double_well_prime(double s);   // s^3 - s
double double_well_second(double s);  // 3 s^2 - 1

// Generic single-constraint gradient flow
//   phi_t = -G mu,  mu = L phi + F'(phi) - lambda h'(phi),  d/dt int h = 0,
// with L, G diagonal positive operators and pointwise F, h.
struct GenericModel {
  SpectralOperator linear_op;    // L
  SpectralOperator mobility_op;  // G
  ScalarFn F = double_well;
  ScalarFn Fp = double_well_prime;
  ScalarFn h = [](double s) { return s * s; };
  ScalarFn hp = [](double s) { return 2.0 * s; };
  ScalarFn hpp = [](double) { return 2.0; };
  double C0 = 1.0;

  static GenericModel allen_cahn(const Grid& g, double mobility = 1.0);
  static GenericModel cahn_hilliard(const Grid& g, double mobility = 1.0);
};

double generic_energy(const GenericModel& m, const RealField& phi);
// 0.5 (L phi, phi) + r^2.
double generic_modified_energy(const GenericModel& m, const RealField& phi,
                               double r);
// sqrt(int F(phi) + C0); throws PositivityError on a non-positive argument.
double sav_r_value(const GenericModel& m, const RealField& phi);
double constraint_value(const GenericModel& m, const RealField& phi);  // int h
RealField constraint_derivative(const GenericModel& m, const RealField& phi);

// Phase-field vesicle membrane: bending energy with volume and surface-area
// constraints; G(phi) = phi^3 - phi, interface width epsilon, mobility M.
struct VesicleModel {
  double epsilon;
  double M = 1.0;

  VesicleModel(double eps, double mobility) : epsilon(eps), M(mobility) {
    if (eps <= 0.0 || mobility <= 0.0)
      throw Error("vesicle model requires epsilon > 0 and M > 0");
  }
};

// (epsilon/2) int (-Lap phi + G(phi)/eps^2)^2.
double vesicle_bending_energy(const VesicleModel& m, const RealField& phi);
// Non-quadratic remainder after extracting (epsilon/2) int |Lap phi|^2.
double vesicle_Q_energy(const VesicleModel& m, const RealField& phi);
// Pointwise density of the remainder energy.  Energy *differences* should be
// integrated from density differences: the multiplier equations divide by
// near-zero denominators on slow dynamics, and differencing large integrals
// would leave them with a roundoff floor.
RealField vesicle_Q_density(const VesicleModel& m, const RealField& phi);
RealField vesicle_dQ_dphi(const VesicleModel& m, const RealField& phi);
// (A, H) = (volume, surface-area) functionals.
std::pair<double, double> vesicle_constraints(const VesicleModel& m,
                                              const RealField& phi);
// -eps Lap phi + F'(phi)/eps.
RealField vesicle_dH_dphi(const VesicleModel& m, const RealField& phi);

// Norm-preserving optimal partition: m components, pairwise interaction
// F = eps^-2 sum_{j<i} phi_i^2 phi_j^2, each component constrained to unit
// L2 norm.
struct PartitionModel {
  int m;
  double epsilon;

  PartitionModel(int components, double eps) : m(components), epsilon(eps) {
    if (components < 1 || eps <= 0.0)
      throw Error("partition model requires m >= 1 and epsilon > 0");
  }
};

double partition_interaction(const PartitionModel& m,
                             const std::vector<RealField>& phis);
RealField partition_interaction_density(const PartitionModel& m,
                                        const std::vector<RealField>& phis);
// (2/eps^2) phi_j sum_{i != j} phi_i^2; j is 1-based as in the constraint
// indexing H_j.
RealField partition_dF_dphi(const PartitionModel& m,
                            const std::vector<RealField>& phis, int j);
double partition_energy(const PartitionModel& m,
                        const std::vector<RealField>& phis);

// Kahan-compensated integral of f(a) - f(b), evaluated pointwise.
double integrate_difference(const RealField& a, const RealField& b,
                            const ScalarFn& f);

}  // namespace cgflow
