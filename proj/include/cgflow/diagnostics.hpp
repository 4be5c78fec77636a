#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cgflow/grid.hpp"

namespace cgflow {

// Named, equal-length real columns with strictly increasing time.
class TimeSeries {
 public:
  TimeSeries() = default;
  explicit TimeSeries(std::vector<std::string> names);

  const std::vector<std::string>& names() const { return names_; }
  std::size_t rows() const;
  std::size_t num_columns() const { return names_.size(); }
  void append(const std::vector<double>& row);
  const std::vector<double>& column(const std::string& name) const;
  const std::vector<double>& column(std::size_t i) const { return cols_[i]; }
  std::optional<std::size_t> index_of(const std::string& name) const;

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<double>> cols_;
};

double linf_error(const RealField& f, const RealField& g);

struct ConvergenceReport {
  std::vector<double> dts;     // strictly decreasing
  std::vector<double> errors;  // L-inf field error vs the reference run
  double observed_order = 0.0;
  bool at_floor = false;  // all points sat on the error floor; order is moot
};

// Least-squares slope of log(error) vs log(dt), excluding points within 10x
// of the error floor.  Returns NaN (and sets at_floor) when nothing remains.
ConvergenceReport fit_order(std::vector<double> dts, std::vector<double> errors,
                            double error_floor);

struct RunConfig;  // config.hpp

ConvergenceReport run_convergence_study(const RunConfig& base,
                                        std::vector<double> dts, double ref_dt);

struct FailureRecord {
  long step = 0;
  double t = 0.0;
  std::string what;
  std::vector<std::pair<double, double>> trace;  // (multiplier, residual)
};

struct CompareBundle {
  std::vector<std::string> labels;
  std::vector<TimeSeries> series;
  std::vector<std::optional<FailureRecord>> failures;
  // Largest |lambda_a(t) - lambda_b(t)| over the common completed prefix of
  // every approach pair; 0 for a single-entry bundle.
  double max_lambda_discrepancy = 0.0;
  // Per approach: max |enforced constraint residual| over its series.
  std::vector<double> constraint_drift;
};

CompareBundle compare_approaches(const RunConfig& base,
                                 const std::vector<int>& approaches);

// Monotonicity audit for unconditionally stable schemes: number of rows where
// the named energy column increases by more than tol_scale*(1 + |E|).
int count_energy_violations(const TimeSeries& series, const std::string& column,
                            double tol_scale = 1e-8,
                            std::size_t first_row = 0);

// CSV with a header row; floats use shortest round-trip formatting.
void write_series_csv(const std::string& path, const TimeSeries& series);

}  // namespace cgflow
