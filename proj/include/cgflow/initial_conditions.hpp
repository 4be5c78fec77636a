#pragma once

#include <map>
#include <string>
#include <vector>

#include "cgflow/grid.hpp"

namespace cgflow {

// Builds one of the named initial profiles.  Most return a single field;
// partition_markers (and random_smooth with count > 1) return one per
// component.  Unknown names or unknown parameter keys raise Error.
std::vector<RealField> builtin_initial_condition(
    const std::string& name, const std::map<std::string, double>& params,
    const Grid& grid);

// Parameter keys accepted by the named profile (for config validation).
std::vector<std::string> initial_condition_params(const std::string& name);
bool is_initial_condition(const std::string& name);

}  // namespace cgflow
