#include "cgflow/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "cgflow/initial_conditions.hpp"

namespace cgflow {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double* out) {
  const std::string t = trim(s);
  const char* first = t.data();
  const char* last = t.data() + t.size();
  auto res = std::from_chars(first, last, *out);
  return res.ec == std::errc() && res.ptr == last;
}

bool parse_long(const std::string& s, long* out) {
  const std::string t = trim(s);
  const char* first = t.data();
  const char* last = t.data() + t.size();
  auto res = std::from_chars(first, last, *out);
  return res.ec == std::errc() && res.ptr == last;
}

// T/dt must land on an integer up to correctly-rounded division error: a few
// ulp, not exact, since decimal endpoints like T=0.02, dt=1e-5 divide to an
// integer only after rounding.
bool divides_to_integer(double T, double dt, long* count) {
  const double q = T / dt;
  if (!(q > 0.0) || !std::isfinite(q)) return false;
  const double n = std::round(q);
  const double ulp = std::nextafter(q, std::numeric_limits<double>::infinity()) - q;
  if (std::abs(q - n) > 4.0 * ulp) return false;
  *count = static_cast<long>(n);
  return *count >= 1;
}

struct SchemeEntry {
  const char* name;
  SchemeKind kind;
  ModelKind model;
};
constexpr SchemeEntry kSchemes[] = {
    {"linear_sav", SchemeKind::kLinearSav, ModelKind::kGeneric},
    {"approach1", SchemeKind::kApproach1, ModelKind::kGeneric},
    {"approach2", SchemeKind::kApproach2Cn, ModelKind::kGeneric},
    {"approach3", SchemeKind::kApproach3Cn, ModelKind::kGeneric},
    {"stabilized", SchemeKind::kStabilizedCn, ModelKind::kGeneric},
    {"vesicle_bdf2", SchemeKind::kVesicleBdf2, ModelKind::kVesicle},
    {"partition_bdf2", SchemeKind::kPartitionBdf2, ModelKind::kPartition},
};

std::string format_double_value(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

long RunConfig::step_count() const {
  long n = 0;
  if (!divides_to_integer(T, dt, &n)) {
    throw Error("T is not an integer multiple of dt");
  }
  return n;
}

const char* scheme_name(SchemeKind s) {
  for (const auto& e : kSchemes) {
    if (e.kind == s) return e.name;
  }
  return "?";
}

const char* model_name(ModelKind m) {
  switch (m) {
    case ModelKind::kGeneric:
      return "generic";
    case ModelKind::kVesicle:
      return "vesicle";
    case ModelKind::kPartition:
      return "partition";
  }
  return "?";
}

ConfigParseResult parse_config(const std::string& text) {
  ConfigParseResult out;
  auto fail = [&out](const std::string& msg) { out.errors.push_back(msg); };

  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail("line " + std::to_string(lineno) + ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      fail("line " + std::to_string(lineno) + ": empty key or value");
      continue;
    }
    if (kv.count(key) != 0) {
      fail("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
      continue;
    }
    kv[key] = value;
  }

  RunConfig cfg;
  std::set<std::string> consumed;
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    consumed.insert(key);
    return it->second;
  };
  auto take_double = [&](const std::string& key, double* dst) {
    if (auto v = take(key)) {
      if (!parse_double(*v, dst)) fail("key '" + key + "': not a number");
      return true;
    }
    return false;
  };
  auto take_long = [&](const std::string& key, long* dst) {
    if (auto v = take(key)) {
      if (!parse_long(*v, dst)) fail("key '" + key + "': not an integer");
      return true;
    }
    return false;
  };

  // model / scheme
  bool scheme_ok = false;
  if (auto v = take("model")) {
    if (*v == "generic") {
      cfg.model = ModelKind::kGeneric;
    } else if (*v == "vesicle") {
      cfg.model = ModelKind::kVesicle;
    } else if (*v == "partition") {
      cfg.model = ModelKind::kPartition;
    } else {
      fail("key 'model': unknown model '" + *v + "'");
    }
  } else {
    fail("missing required key 'model'");
  }
  if (auto v = take("scheme")) {
    for (const auto& e : kSchemes) {
      if (*v == e.name) {
        cfg.scheme = e.kind;
        scheme_ok = true;
        if (e.model != cfg.model) {
          fail("scheme '" + *v + "' is incompatible with model '" +
               model_name(cfg.model) + "'");
        }
        break;
      }
    }
    if (!scheme_ok) fail("key 'scheme': unknown scheme '" + *v + "'");
  } else {
    fail("missing required key 'scheme'");
  }

  // grid
  long dims = 0;
  if (!take_long("grid.dims", &dims)) fail("missing required key 'grid.dims'");
  if (auto v = take("grid.modes")) {
    std::istringstream ms(*v);
    std::vector<int> modes;
    long n;
    std::string tok;
    bool bad = false;
    while (ms >> tok) {
      if (!parse_long(tok, &n) || n <= 0) {
        bad = true;
        break;
      }
      modes.push_back(static_cast<int>(n));
    }
    if (bad) {
      fail("key 'grid.modes': expected positive integers");
    } else if (dims >= 1 && dims <= 3 &&
               modes.size() != static_cast<std::size_t>(dims)) {
      fail("key 'grid.modes': expected " + std::to_string(dims) + " entries");
    } else if (dims >= 1 && dims <= 3) {
      try {
        cfg.grid = Grid::make(modes);
      } catch (const Error& e) {
        fail(std::string("key 'grid.modes': ") + e.what());
      }
    }
  } else {
    fail("missing required key 'grid.modes'");
  }
  if (dims < 1 || dims > 3) fail("key 'grid.dims': must be 1, 2 or 3");

  // time stepping
  if (!take_double("dt", &cfg.dt)) fail("missing required key 'dt'");
  if (!take_double("T", &cfg.T)) fail("missing required key 'T'");
  if (cfg.dt <= 0.0) fail("key 'dt': must be positive");
  if (cfg.T <= 0.0) fail("key 'T': must be positive");
  long steps = 0;
  if (cfg.dt > 0.0 && cfg.T > 0.0 && !divides_to_integer(cfg.T, cfg.dt, &steps)) {
    fail("T must be an integer multiple of dt (T = " + format_double_value(cfg.T) +
         ", dt = " + format_double_value(cfg.dt) + ")");
  }

  // model parameters
  take_double("model.epsilon", &cfg.epsilon);
  take_double("model.M", &cfg.M);
  take_double("model.C0", &cfg.C0);
  long mval = cfg.m;
  take_long("model.m", &mval);
  cfg.m = static_cast<int>(mval);
  take_double("stab.eps1", &cfg.eps1);
  take_double("stab.eps2", &cfg.eps2);
  long approach = cfg.vesicle_approach;
  take_long("vesicle.approach", &approach);
  cfg.vesicle_approach = static_cast<int>(approach);
  if (auto v = take("model.mobility")) {
    if (*v != "allen-cahn" && *v != "cahn-hilliard") {
      fail("key 'model.mobility': expected allen-cahn or cahn-hilliard");
    } else {
      cfg.mobility = *v;
    }
  }
  if (auto v = take("model.potential")) {
    if (*v != "double_well" && *v != "zero") {
      fail("key 'model.potential': expected double_well or zero");
    } else {
      cfg.potential = *v;
    }
  }
  if (auto v = take("model.constraint")) {
    if (*v != "norm2" && *v != "mass") {
      fail("key 'model.constraint': expected norm2 or mass");
    } else {
      cfg.constraint = *v;
    }
  }

  if (cfg.epsilon <= 0.0) fail("key 'model.epsilon': must be positive");
  if (cfg.M <= 0.0) fail("key 'model.M': must be positive");
  if (cfg.m < 1) fail("key 'model.m': must be >= 1");
  if (cfg.eps1 < 0.0 || cfg.eps2 < 0.0) {
    fail("stabilization constants must be nonnegative");
  }
  if ((cfg.eps1 != 0.0 || cfg.eps2 != 0.0) &&
      cfg.scheme != SchemeKind::kStabilizedCn) {
    fail("stab.eps1/eps2 apply only to scheme 'stabilized'");
  }
  if (cfg.vesicle_approach < 1 || cfg.vesicle_approach > 3) {
    fail("key 'vesicle.approach': must be 1, 2 or 3");
  }

  // initial condition
  if (auto v = take("ic.name")) {
    cfg.ic_name = *v;
    if (!is_initial_condition(*v)) {
      fail("key 'ic.name': unknown initial condition '" + *v + "'");
    }
  } else {
    fail("missing required key 'ic.name'");
  }
  // Model / grid / profile compatibility, so that no configuration error can
  // surface once stepping has begun.
  if (is_initial_condition(cfg.ic_name) && dims >= 1 && dims <= 3) {
    const bool needs_2d = cfg.ic_name == "two_circles_2d" ||
                          cfg.ic_name == "smooth_trig" ||
                          cfg.ic_name == "partition_markers";
    const bool needs_3d = cfg.ic_name == "four_spheres_3d" ||
                          cfg.ic_name == "six_spheres_3d";
    if (needs_2d && dims != 2) {
      fail("ic.name '" + cfg.ic_name + "' requires grid.dims = 2");
    }
    if (needs_3d && dims != 3) {
      fail("ic.name '" + cfg.ic_name + "' requires grid.dims = 3");
    }
    if (cfg.model == ModelKind::kPartition) {
      if (cfg.ic_name != "partition_markers" &&
          cfg.ic_name != "random_smooth") {
        fail("partition runs need ic.name partition_markers or random_smooth");
      }
    } else if (cfg.ic_name == "partition_markers") {
      fail("ic.name 'partition_markers' requires model = partition");
    }
  }
  std::vector<std::string> allowed_ic;
  if (is_initial_condition(cfg.ic_name)) {
    allowed_ic = initial_condition_params(cfg.ic_name);
  }
  for (const auto& [key, value] : kv) {
    if (key.rfind("ic.", 0) != 0 || key == "ic.name") continue;
    const std::string pname = key.substr(3);
    consumed.insert(key);
    double pval;
    if (!parse_double(value, &pval)) {
      fail("key '" + key + "': not a number");
      continue;
    }
    if (!allowed_ic.empty() &&
        std::find(allowed_ic.begin(), allowed_ic.end(), pname) ==
            allowed_ic.end()) {
      fail("key '" + key + "': initial condition '" + cfg.ic_name +
           "' does not take this parameter");
      continue;
    }
    cfg.ic_params[pname] = pval;
  }
  if (cfg.ic_name == "random_smooth" && cfg.ic_params.count("count")) {
    const int count = static_cast<int>(cfg.ic_params.at("count"));
    if (cfg.model == ModelKind::kPartition) {
      if (count != cfg.m) fail("ic.count must equal model.m for partitions");
    } else if (count != 1) {
      fail("ic.count must be 1 for single-field models");
    }
  }

  // output / seed
  take_long("output.series_stride", &cfg.series_stride);
  take_long("output.snapshot_stride", &cfg.snapshot_stride);
  if (cfg.series_stride < 1) fail("key 'output.series_stride': must be >= 1");
  if (cfg.snapshot_stride < 0) {
    fail("key 'output.snapshot_stride': must be >= 0");
  }
  long seed = 0;
  if (take_long("seed", &seed)) {
    if (seed < 0) fail("key 'seed': must be nonnegative");
    cfg.seed = static_cast<unsigned long>(seed);
  }

  for (const auto& [key, value] : kv) {
    (void)value;
    if (consumed.count(key) == 0) fail("unknown key '" + key + "'");
  }

  if (out.errors.empty()) out.config = cfg;
  return out;
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream o;
  o << "model = " << model_name(cfg.model) << "\n";
  o << "scheme = " << scheme_name(cfg.scheme) << "\n";
  o << "grid.dims = " << cfg.grid.dims << "\n";
  o << "grid.modes =";
  for (int a = 0; a < cfg.grid.dims; ++a) o << " " << cfg.grid.modes[a];
  o << "\n";
  o << "dt = " << format_double_value(cfg.dt) << "\n";
  o << "T = " << format_double_value(cfg.T) << "\n";
  o << "model.epsilon = " << format_double_value(cfg.epsilon) << "\n";
  o << "model.M = " << format_double_value(cfg.M) << "\n";
  o << "model.C0 = " << format_double_value(cfg.C0) << "\n";
  o << "model.m = " << cfg.m << "\n";
  if (cfg.model == ModelKind::kGeneric) {
    o << "model.mobility = " << cfg.mobility << "\n";
    o << "model.potential = " << cfg.potential << "\n";
    o << "model.constraint = " << cfg.constraint << "\n";
  }
  if (cfg.scheme == SchemeKind::kStabilizedCn) {
    o << "stab.eps1 = " << format_double_value(cfg.eps1) << "\n";
    o << "stab.eps2 = " << format_double_value(cfg.eps2) << "\n";
  }
  if (cfg.model == ModelKind::kVesicle) {
    o << "vesicle.approach = " << cfg.vesicle_approach << "\n";
  }
  o << "ic.name = " << cfg.ic_name << "\n";
  for (const auto& [k, v] : cfg.ic_params) {
    o << "ic." << k << " = " << format_double_value(v) << "\n";
  }
  o << "output.series_stride = " << cfg.series_stride << "\n";
  o << "output.snapshot_stride = " << cfg.snapshot_stride << "\n";
  o << "seed = " << cfg.seed << "\n";
  return o.str();
}

}  // namespace cgflow
