#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cgflow/grid.hpp"
#include "cgflow/steppers.hpp"

namespace cgflow {

enum class ModelKind { kGeneric, kVesicle, kPartition };

struct RunConfig {
  ModelKind model = ModelKind::kGeneric;
  SchemeKind scheme = SchemeKind::kApproach1;
  Grid grid;
  double dt = 0.0;
  double T = 0.0;

  double epsilon = 0.1473;  // interface width / interaction strength
  double M = 1.0;           // mobility constant
  double C0 = 1.0;          // SAV shift
  int m = 1;                // partition component count
  double eps1 = 0.0;        // stabilization constants
  double eps2 = 0.0;
  int vesicle_approach = 3;

  // Generic-model presets.
  std::string mobility = "allen-cahn";   // or "cahn-hilliard"
  std::string potential = "double_well";  // or "zero"
  std::string constraint = "norm2";       // or "mass"

  std::string ic_name;
  std::map<std::string, double> ic_params;

  long series_stride = 1;
  long snapshot_stride = 0;  // 0 disables snapshots
  unsigned long seed = 0;

  long step_count() const;
};

struct ConfigParseResult {
  std::optional<RunConfig> config;
  std::vector<std::string> errors;  // every violation, not just the first
  bool ok() const { return errors.empty() && config.has_value(); }
};

// Flat "section.key = value" text format; '#' starts a comment.
ConfigParseResult parse_config(const std::string& text);
std::string serialize_config(const RunConfig& cfg);

const char* scheme_name(SchemeKind s);
const char* model_name(ModelKind m);

}  // namespace cgflow
