#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "cgflow/models.hpp"
#include "cgflow/multipliers.hpp"

namespace cgflow {

enum class SchemeKind {
  kLinearSav,
  kApproach1,
  kApproach2Cn,
  kApproach3Cn,
  kStabilizedCn,
  kVesicleBdf2,
  kPartitionBdf2,
};

struct StabilizationParams {
  double eps1 = 0.0;
  double eps2 = 0.0;
};

// Rolling solver state.  phi_n holds one field for the scalar models and m
// fields for the partition model; phi_nm1 is filled by the bootstrap step.
struct SchemeState {
  std::vector<RealField> phi_n;
  std::vector<RealField> phi_nm1;
  std::optional<double> r_n;    // SAV auxiliary variable
  std::optional<double> r_nm1;  // second SAV level for the BDF2 SAV variant
  long step = 0;
  double t = 0.0;
  double dt = 0.0;
  double H0 = 0.0;  // cached constraint target H(phi^0)
  double A0 = 0.0;  // cached vesicle volume target A(phi^0)
  std::vector<double> norm_targets;  // partition: int |phi_j^0|^2
  double sav_shift = 0.0;  // effective C0 under the sqrt for the vesicle SAV
  // Number of leading first-order (backward-Euler) steps before BDF2 takes
  // over.  Off-manifold interface data benefits from 2 (the extrapolated
  // history then never straddles the initial layer).
  int warmup_steps = 1;

  // Multiplier memory, used for predictors and root selection.
  std::vector<double> lambda_prev;
  double eta_prev = 1.0;
  double gamma_prev = 0.0;

  const RealField& phi() const { return phi_n.at(0); }
};

struct StepReport {
  std::vector<double> lambda;  // one entry, or one per partition component
  std::optional<double> eta;
  std::optional<double> gamma;
  int newton_iters = 0;
  double energy_original = 0.0;
  // Modified (SAV) energy or the two-level discrete energy, per scheme.
  double energy_discrete = 0.0;
  // Residuals of the enforced-field constraints first, then the raw-field
  // values where the two differ (surrogate-enforcing schemes).
  std::vector<double> constraint_residuals;
  double dissipation = 0.0;  // -dt (G mu, mu) at the scheme's native time point
  std::optional<double> dissipation_residual;  // CN exact-identity check
  std::optional<double> tangency_residual;     // linear SAV only
  // The surrogate fields the constraints were enforced on, when distinct
  // from phi^{n+1}.
  std::vector<RealField> surrogate_fields;
};

using StepResult = std::pair<SchemeState, StepReport>;

// State constructors record the constraint targets and initial SAV values.
SchemeState make_generic_state(const GenericModel& m, RealField phi0, double dt);
SchemeState make_vesicle_state(const VesicleModel& m, RealField phi0, double dt,
                               double C0 = 1.0);
SchemeState make_partition_state(const PartitionModel& m,
                                 std::vector<RealField> phi0, double dt);

// First-order SAV scheme; the constraint is linearized (first-order accurate).
StepResult step_linear_sav(const SchemeState& s, const GenericModel& m);
// First-order SAV with the constraint enforced exactly through a scalar
// Newton solve for lambda.
StepResult step_approach1(const SchemeState& s, const GenericModel& m);
// Crank-Nicolson with dynamic multiplier eta; (eta, lambda) solved coupled.
StepResult step_approach2_cn(const SchemeState& s, const GenericModel& m);
// Crank-Nicolson; lambda solved first on the eta-independent surrogate, then
// eta from the energy equation.
StepResult step_approach3_cn(const SchemeState& s, const GenericModel& m);
// Approach 2 plus second-difference stabilization terms.
StepResult step_stabilized_cn(const SchemeState& s, const GenericModel& m,
                              const StabilizationParams& stab);
// BDF2 vesicle scheme; approach selects the multiplier strategy:
//   1: SAV auxiliary for the bending remainder, (gamma, lambda) coupled,
//      constraints enforced on phi^{n+1} itself;
//   2: dynamic eta, (eta, lambda) coupled after eliminating gamma,
//      constraints enforced on phi^{n+1} itself;
//   3: dynamic eta resolved sequentially, constraints enforced on the
//      eta-independent surrogate.
StepResult step_vesicle_bdf2(const SchemeState& s, const VesicleModel& m,
                             int approach);
// BDF2 optimal-partition scheme; per-component lambda_j from a quadratic,
// then a global eta.
StepResult step_partition_bdf2(const SchemeState& s, const PartitionModel& m);

// One step of the matching first-order scheme, recording phi^0 as the
// previous level.  The multistep steppers call this automatically when the
// history is missing, so it rarely needs to be invoked directly.
StepResult bootstrap_first_step(const SchemeState& s, const GenericModel& m,
                                SchemeKind kind);
StepResult bootstrap_first_step(const SchemeState& s, const VesicleModel& m,
                                int approach);
StepResult bootstrap_first_step(const SchemeState& s, const PartitionModel& m);

}  // namespace cgflow
