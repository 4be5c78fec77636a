#include "cgflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "cgflow/runner.hpp"
#include "cgflow/snapshot.hpp"

namespace cgflow {

TimeSeries::TimeSeries(std::vector<std::string> names)
    : names_(std::move(names)), cols_(names_.size()) {}

std::size_t TimeSeries::rows() const {
  return cols_.empty() ? 0 : cols_[0].size();
}

void TimeSeries::append(const std::vector<double>& row) {
  if (row.size() != names_.size()) {
    throw Error("time series row width mismatch");
  }
  if (!names_.empty() && names_[0] == "t" && !cols_[0].empty() &&
      !(row[0] > cols_[0].back())) {
    throw Error("time series requires strictly increasing t");
  }
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (!std::isfinite(row[i]) && names_[i] != "eta" && names_[i] != "gamma" &&
        names_[i] != "dissipation_residual") {
      throw Error("non-finite value in time series column " + names_[i]);
    }
    cols_[i].push_back(row[i]);
  }
}

const std::vector<double>& TimeSeries::column(const std::string& name) const {
  const auto idx = index_of(name);
  if (!idx) throw Error("no time series column named " + name);
  return cols_[*idx];
}

std::optional<std::size_t> TimeSeries::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

double linf_error(const RealField& f, const RealField& g) {
  require_same_grid(f.grid(), g.grid(), "linf_error");
  double m = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    m = std::max(m, std::abs(f[i] - g[i]));
  }
  return m;
}

ConvergenceReport fit_order(std::vector<double> dts, std::vector<double> errors,
                            double error_floor) {
  if (dts.size() != errors.size() || dts.empty()) {
    throw Error("fit_order needs matching non-empty dt/error lists");
  }
  for (std::size_t i = 1; i < dts.size(); ++i) {
    if (!(dts[i] < dts[i - 1])) {
      throw Error("fit_order expects strictly decreasing dts");
    }
  }
  ConvergenceReport rep;
  rep.dts = std::move(dts);
  rep.errors = std::move(errors);

  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < rep.dts.size(); ++i) {
    if (!(rep.errors[i] > 0.0)) continue;
    if (rep.errors[i] < 10.0 * error_floor) continue;  // sits on the floor
    lx.push_back(std::log(rep.dts[i]));
    ly.push_back(std::log(rep.errors[i]));
  }
  if (lx.size() < 2) {
    rep.at_floor = true;
    rep.observed_order = std::numeric_limits<double>::quiet_NaN();
    return rep;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(lx.size());
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  rep.observed_order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return rep;
}

ConvergenceReport run_convergence_study(const RunConfig& base,
                                        std::vector<double> dts,
                                        double ref_dt) {
  if (dts.empty()) throw Error("convergence study needs at least one dt");
  std::sort(dts.begin(), dts.end(), std::greater<double>());
  if (!(ref_dt < dts.back())) {
    throw Error("reference dt must be smaller than every study dt");
  }
  // Validate divisibility for every run up front.
  for (double dt : dts) {
    RunConfig probe = base;
    probe.dt = dt;
    (void)probe.step_count();
  }
  RunConfig ref_cfg = base;
  ref_cfg.dt = ref_dt;
  (void)ref_cfg.step_count();

  const SimulationResult ref = simulate(ref_cfg);
  if (ref.failure) {
    throw Error("convergence study reference run failed: " + ref.failure->what);
  }

  std::vector<double> errors;
  double ref_scale = 0.0;
  for (const auto& f : ref.final_fields) ref_scale = std::max(ref_scale, max_abs(f));
  for (double dt : dts) {
    RunConfig cfg = base;
    cfg.dt = dt;
    const SimulationResult run = simulate(cfg);
    if (run.failure) {
      throw Error("convergence study run at dt=" + std::to_string(dt) +
                  " failed: " + run.failure->what);
    }
    double err = 0.0;
    for (std::size_t j = 0; j < run.final_fields.size(); ++j) {
      err = std::max(err, linf_error(run.final_fields[j], ref.final_fields[j]));
    }
    errors.push_back(err);
  }
  return fit_order(std::move(dts), std::move(errors), 1e-12 * ref_scale);
}

CompareBundle compare_approaches(const RunConfig& base,
                                 const std::vector<int>& approaches) {
  if (approaches.empty()) throw Error("compare needs at least one approach");
  CompareBundle bundle;
  for (int a : approaches) {
    RunConfig cfg = base;
    if (cfg.model == ModelKind::kVesicle) {
      cfg.vesicle_approach = a;
    } else if (cfg.model == ModelKind::kGeneric) {
      switch (a) {
        case 1:
          cfg.scheme = SchemeKind::kApproach1;
          break;
        case 2:
          cfg.scheme = SchemeKind::kApproach2Cn;
          break;
        case 3:
          cfg.scheme = SchemeKind::kApproach3Cn;
          break;
        default:
          throw Error("generic approaches are 1, 2 or 3");
      }
    } else {
      throw Error("compare_approaches applies to generic or vesicle runs");
    }
    const SimulationResult res = simulate(cfg);
    bundle.labels.push_back("approach" + std::to_string(a));
    bundle.failures.push_back(res.failure);

    double drift = 0.0;
    for (const auto& name : res.series.names()) {
      if (name.find("enforced_res") == std::string::npos) continue;
      for (double v : res.series.column(name)) {
        drift = std::max(drift, std::abs(v));
      }
    }
    bundle.constraint_drift.push_back(drift);
    bundle.series.push_back(res.series);
  }

  for (std::size_t i = 0; i < bundle.series.size(); ++i) {
    for (std::size_t j = i + 1; j < bundle.series.size(); ++j) {
      const auto& la = bundle.series[i].column("lambda");
      const auto& lb = bundle.series[j].column("lambda");
      const std::size_t n = std::min(la.size(), lb.size());
      for (std::size_t k = 0; k < n; ++k) {
        bundle.max_lambda_discrepancy =
            std::max(bundle.max_lambda_discrepancy, std::abs(la[k] - lb[k]));
      }
    }
  }
  return bundle;
}

int count_energy_violations(const TimeSeries& series, const std::string& column,
                            double tol_scale, std::size_t first_row) {
  const auto& e = series.column(column);
  int violations = 0;
  for (std::size_t i = first_row + 1; i < e.size(); ++i) {
    if (e[i] > e[i - 1] + tol_scale * (1.0 + std::abs(e[i - 1]))) ++violations;
  }
  return violations;
}

void write_series_csv(const std::string& path, const TimeSeries& series) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open CSV file for writing: " + path);
  for (std::size_t i = 0; i < series.names().size(); ++i) {
    if (i) out << ',';
    out << series.names()[i];
  }
  out << "\n";
  for (std::size_t r = 0; r < series.rows(); ++r) {
    for (std::size_t c = 0; c < series.num_columns(); ++c) {
      if (c) out << ',';
      out << format_double(series.column(c)[r]);
    }
    out << "\n";
  }
}

}  // namespace cgflow
