#pragma once

#include <filesystem>
#include <functional>
#include <optional>

#include "cgflow/config.hpp"
#include "cgflow/diagnostics.hpp"

namespace cgflow {

enum class RunStatus : int {
  kSuccess = 0,
  kNumericalFailure = 1,
  kConfigError = 2,
};

struct SimulationResult {
  TimeSeries series;
  std::vector<RealField> initial_fields;
  std::vector<RealField> final_fields;  // last valid state
  std::optional<FailureRecord> failure;
  long steps_completed = 0;
};

// Called after every completed step; state is the post-step state.
using StepObserver =
    std::function<void(long step, const SchemeState& state, const StepReport&)>;

// In-memory driver shared by the CLI, the diagnostics studies and the tests.
// A multiplier/numerical failure ends the run early and is recorded, not
// rethrown; structural errors still propagate.
SimulationResult simulate(const RunConfig& cfg,
                          const StepObserver& observer = nullptr);

// CLI entry point: runs and writes series.csv, snapshot_*.cgf and, on
// numerical failure, failure.json under out_dir.
RunStatus run(const RunConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace cgflow
