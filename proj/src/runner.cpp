#include "cgflow/runner.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "cgflow/initial_conditions.hpp"
#include "cgflow/snapshot.hpp"

namespace cgflow {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

GenericModel build_generic(const RunConfig& cfg) {
  GenericModel m = cfg.mobility == "cahn-hilliard"
                       ? GenericModel::cahn_hilliard(cfg.grid, cfg.M)
                       : GenericModel::allen_cahn(cfg.grid, cfg.M);
  if (cfg.potential == "zero") {
    m.F = [](double) { return 0.0; };
    m.Fp = [](double) { return 0.0; };
  }
  if (cfg.constraint == "mass") {
    m.h = [](double s) { return s; };
    m.hp = [](double) { return 1.0; };
    m.hpp = [](double) { return 0.0; };
  }
  m.C0 = cfg.C0;
  return m;
}

std::vector<RealField> build_ic(const RunConfig& cfg) {
  auto params = cfg.ic_params;
  if ((cfg.ic_name == "two_circles_2d" || cfg.ic_name == "four_spheres_3d" ||
       cfg.ic_name == "six_spheres_3d") &&
      params.count("epsilon") == 0) {
    params["epsilon"] = cfg.epsilon;
  }
  if (cfg.ic_name == "random_smooth") {
    if (params.count("seed") == 0) {
      params["seed"] = static_cast<double>(cfg.seed);
    }
    if (cfg.model == ModelKind::kPartition) {
      if (params.count("count") == 0) params["count"] = cfg.m;
      if (params.count("normalize") == 0) params["normalize"] = 1.0;
    }
  }
  if (cfg.ic_name == "partition_markers" && params.count("m") == 0) {
    params["m"] = static_cast<double>(cfg.m);
  }
  return builtin_initial_condition(cfg.ic_name, params, cfg.grid);
}

struct Driver {
  SchemeState state;
  std::function<StepResult(const SchemeState&)> step;
  std::vector<std::string> columns;
  std::function<std::vector<double>(const SchemeState&, const StepReport&)>
      row_of;
};

Driver make_driver(const RunConfig& cfg) {
  Driver d;
  std::vector<RealField> ic = build_ic(cfg);
  if (cfg.model != ModelKind::kPartition && ic.size() != 1) {
    throw Error("scalar model needs a single-field initial condition");
  }

  if (cfg.model == ModelKind::kGeneric) {
    auto model = std::make_shared<GenericModel>(build_generic(cfg));
    d.state = make_generic_state(*model, std::move(ic[0]), cfg.dt);
    const SchemeKind scheme = cfg.scheme;
    const StabilizationParams stab{cfg.eps1, cfg.eps2};
    d.step = [model, scheme, stab](const SchemeState& s) {
      switch (scheme) {
        case SchemeKind::kLinearSav:
          return step_linear_sav(s, *model);
        case SchemeKind::kApproach1:
          return step_approach1(s, *model);
        case SchemeKind::kApproach2Cn:
          return step_approach2_cn(s, *model);
        case SchemeKind::kApproach3Cn:
          return step_approach3_cn(s, *model);
        case SchemeKind::kStabilizedCn:
          return step_stabilized_cn(s, *model, stab);
        default:
          throw Error("scheme/model mismatch");
      }
    };
    d.columns = {"t",           "E_original",   "E_discrete",
                 "H",           "H_enforced_res", "H_phi_res",
                 "lambda",      "eta",          "gamma",
                 "newton_iters", "dissipation",  "dissipation_residual"};
    const double H0 = d.state.H0;
    d.row_of = [H0](const SchemeState& s, const StepReport& r) {
      const bool split = r.constraint_residuals.size() > 1;
      const double enforced = r.constraint_residuals.at(0);
      const double raw = split ? r.constraint_residuals.at(1) : enforced;
      return std::vector<double>{s.t,
                                 r.energy_original,
                                 r.energy_discrete,
                                 H0 + raw,
                                 enforced,
                                 raw,
                                 r.lambda.at(0),
                                 r.eta.value_or(kNan),
                                 r.gamma.value_or(kNan),
                                 static_cast<double>(r.newton_iters),
                                 r.dissipation,
                                 r.dissipation_residual.value_or(kNan)};
    };
    return d;
  }

  if (cfg.model == ModelKind::kVesicle) {
    auto model = std::make_shared<VesicleModel>(cfg.epsilon, cfg.M);
    d.state = make_vesicle_state(*model, std::move(ic[0]), cfg.dt, cfg.C0);
    d.state.warmup_steps = 2;
    const int approach = cfg.vesicle_approach;
    d.step = [model, approach](const SchemeState& s) {
      return step_vesicle_bdf2(s, *model, approach);
    };
    d.columns = {"t",           "E_original",     "E_discrete",
                 "A",           "H",              "A_enforced_res",
                 "H_enforced_res", "A_phi_res",   "H_phi_res",
                 "lambda",      "eta",            "gamma",
                 "newton_iters", "dissipation"};
    const double A0 = d.state.A0;
    const double H0 = d.state.H0;
    d.row_of = [A0, H0](const SchemeState& s, const StepReport& r) {
      const bool split = r.constraint_residuals.size() > 2;
      const double a_enf = r.constraint_residuals.at(0);
      const double h_enf = r.constraint_residuals.at(1);
      const double a_raw = split ? r.constraint_residuals.at(2) : a_enf;
      const double h_raw = split ? r.constraint_residuals.at(3) : h_enf;
      return std::vector<double>{s.t,
                                 r.energy_original,
                                 r.energy_discrete,
                                 A0 + a_raw,
                                 H0 + h_raw,
                                 a_enf,
                                 h_enf,
                                 a_raw,
                                 h_raw,
                                 r.lambda.at(0),
                                 r.eta.value_or(kNan),
                                 r.gamma.value_or(kNan),
                                 static_cast<double>(r.newton_iters),
                                 r.dissipation};
    };
    return d;
  }

  auto model = std::make_shared<PartitionModel>(cfg.m, cfg.epsilon);
  d.state = make_partition_state(*model, std::move(ic), cfg.dt);
  d.step = [model](const SchemeState& s) {
    return step_partition_bdf2(s, *model);
  };
  d.columns = {"t", "E_original", "E_discrete"};
  const std::size_t mm = static_cast<std::size_t>(cfg.m);
  for (std::size_t j = 1; j <= mm; ++j) {
    d.columns.push_back("lambda_" + std::to_string(j));
  }
  d.columns.push_back("eta");
  for (std::size_t j = 1; j <= mm; ++j) {
    d.columns.push_back("norm_enforced_res_" + std::to_string(j));
  }
  for (std::size_t j = 1; j <= mm; ++j) {
    d.columns.push_back("norm_phi_res_" + std::to_string(j));
  }
  d.columns.push_back("newton_iters");
  d.columns.push_back("dissipation");
  d.row_of = [mm](const SchemeState& s, const StepReport& r) {
    std::vector<double> row{s.t, r.energy_original, r.energy_discrete};
    for (std::size_t j = 0; j < mm; ++j) row.push_back(r.lambda.at(j));
    row.push_back(r.eta.value_or(kNan));
    for (std::size_t j = 0; j < 2 * mm; ++j) {
      row.push_back(r.constraint_residuals.at(j));
    }
    row.push_back(static_cast<double>(r.newton_iters));
    row.push_back(r.dissipation);
    return row;
  };
  return d;
}

FailureRecord failure_from(const Error& e, const SchemeState& state) {
  FailureRecord rec;
  rec.step = state.step + 1;  // the step that failed
  rec.t = state.t + state.dt;
  rec.what = e.what();
  if (const auto* mf = dynamic_cast<const MultiplierFailure*>(&e)) {
    for (const auto& p : mf->trace()) rec.trace.emplace_back(p.x, p.residual);
  }
  return rec;
}

}  // namespace

SimulationResult simulate(const RunConfig& cfg, const StepObserver& observer) {
  Driver d = make_driver(cfg);
  const long n_steps = cfg.step_count();

  SimulationResult result;
  result.initial_fields = d.state.phi_n;
  result.series = TimeSeries(d.columns);

  for (long i = 1; i <= n_steps; ++i) {
    try {
      auto [next, report] = d.step(d.state);
      d.state = std::move(next);
      result.series.append(d.row_of(d.state, report));
      result.steps_completed = i;
      if (observer) observer(i, d.state, report);
    } catch (const GridMismatchError&) {
      throw;  // structural misuse, not a numerical event
    } catch (const Error& e) {
      result.failure = failure_from(e, d.state);
      break;
    }
  }
  result.final_fields = d.state.phi_n;
  return result;
}

RunStatus run(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create output directory " + out_dir.string());

  const long n_steps = cfg.step_count();
  std::ofstream csv(out_dir / "series.csv", std::ios::trunc);
  if (!csv) throw Error("cannot open series.csv for writing");

  auto snapshot_name = [&](long step) {
    std::ostringstream name;
    name << "snapshot_" << std::setw(8) << std::setfill('0') << step << ".cgf";
    return out_dir / name.str();
  };

  Driver d = make_driver(cfg);
  {
    std::string header;
    for (std::size_t i = 0; i < d.columns.size(); ++i) {
      if (i) header += ',';
      header += d.columns[i];
    }
    csv << header << "\n";
    csv.flush();
  }
  if (cfg.snapshot_stride > 0) {
    write_snapshot(snapshot_name(0), d.state.phi_n, 0.0);
  }

  std::optional<FailureRecord> failure;
  long completed = 0;
  for (long i = 1; i <= n_steps; ++i) {
    StepReport report;
    try {
      auto [next, rep] = d.step(d.state);
      d.state = std::move(next);
      report = std::move(rep);
      completed = i;
    } catch (const GridMismatchError&) {
      throw;
    } catch (const Error& e) {
      failure = failure_from(e, d.state);
      break;
    }
    if (i % cfg.series_stride == 0 || i == n_steps) {
      const auto row = d.row_of(d.state, report);
      std::string line;
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) line += ',';
        line += format_double(row[c]);
      }
      csv << line << "\n";
      csv.flush();  // rows are whole lines; a crash never truncates mid-record
    }
    if (cfg.snapshot_stride > 0 &&
        (i % cfg.snapshot_stride == 0 || i == n_steps)) {
      write_snapshot(snapshot_name(i), d.state.phi_n, d.state.t);
    }
  }
  if (failure) {
    nlohmann::json j;
    j["step"] = failure->step;
    j["t"] = failure->t;
    j["error"] = failure->what;
    j["steps_completed"] = completed;
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& [x, r] : failure->trace) {
      trace.push_back({{"value", x}, {"residual", r}});
    }
    j["trace"] = trace;
    std::ofstream jf(out_dir / "failure.json", std::ios::trunc);
    jf << j.dump(2) << "\n";
    return RunStatus::kNumericalFailure;
  }
  return RunStatus::kSuccess;
}

}  // namespace cgflow
