#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <vector>

#include "cgflow/errors.hpp"

namespace cgflow {

// Uniform periodic grid on [-pi, pi)^d, d in {1,2,3}.  Point counts must be
// even and >= 4 so the integer wavenumber set {-N/2, ..., N/2-1} is valid.
struct Grid {
  int dims = 0;
  std::array<int, 3> modes{1, 1, 1};

  static Grid make(const std::vector<int>& n);

  std::size_t point_count() const {
    std::size_t p = 1;
    for (int a = 0; a < dims; ++a) p *= static_cast<std::size_t>(modes[a]);
    return p;
  }
  // Number of retained modes in the half-complex (r2c) layout.
  std::size_t spectral_count() const {
    std::size_t p = 1;
    for (int a = 0; a < dims - 1; ++a) p *= static_cast<std::size_t>(modes[a]);
    return p * static_cast<std::size_t>(modes[dims - 1] / 2 + 1);
  }
  double spacing(int axis) const {
    return 2.0 * std::numbers::pi / static_cast<double>(modes[axis]);
  }
  double cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dims; ++a) v *= spacing(a);
    return v;
  }
  double volume() const {
    double v = 1.0;
    for (int a = 0; a < dims; ++a) v *= 2.0 * std::numbers::pi;
    return v;
  }
  double coord(int axis, int index) const {
    return -std::numbers::pi + spacing(axis) * static_cast<double>(index);
  }

  friend bool operator==(const Grid&, const Grid&) = default;
};

// Real scalar field sampled on a Grid, row-major (last axis fastest).
class RealField {
 public:
  RealField() = default;
  explicit RealField(const Grid& g, double fill = 0.0)
      : grid_(g), values_(g.point_count(), fill) {}
  RealField(const Grid& g, std::vector<double> values);

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  RealField& operator+=(const RealField& other);
  RealField& operator-=(const RealField& other);
  RealField& operator*=(double s);
  // this += s * other
  RealField& axpy(double s, const RealField& other);

  friend bool operator==(const RealField&, const RealField&) = default;

 private:
  Grid grid_;
  std::vector<double> values_;
};

RealField operator+(RealField a, const RealField& b);
RealField operator-(RealField a, const RealField& b);
RealField operator*(double s, RealField a);

// Pointwise product and map.
RealField multiply(const RealField& a, const RealField& b);
RealField map(const RealField& a, const std::function<double(double)>& fn);

// a*f + b*g (+ c*h), all on one grid.
RealField combine(double a, const RealField& f, double b, const RealField& g);
RealField combine(double a, const RealField& f, double b, const RealField& g,
                  double c, const RealField& h);

// Sample fn(x), fn(x,y) or fn(x,y,z) depending on grid dimension; unused
// trailing coordinates are passed as 0.
RealField sample(const Grid& g,
                 const std::function<double(double, double, double)>& fn);

double max_abs(const RealField& f);
bool all_finite(const RealField& f);

void require_same_grid(const Grid& a, const Grid& b, const char* where);

// Compensated (Kahan) accumulation used by all quadrature sums.
class KahanAccumulator {
 public:
  void add(double value) {
    const double y = value - c_;
    const double t = sum_ + y;
    c_ = (t - sum_) - y;
    sum_ = t;
  }
  double sum() const { return sum_; }

 private:
  double sum_ = 0.0;
  double c_ = 0.0;
};

}  // namespace cgflow
