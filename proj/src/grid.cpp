#include "cgflow/grid.hpp"

#include <cmath>
#include <string>

namespace cgflow {

Grid Grid::make(const std::vector<int>& n) {
  if (n.empty() || n.size() > 3) {
    throw Error("grid dims must be 1, 2 or 3, got " + std::to_string(n.size()));
  }
  Grid g;
  g.dims = static_cast<int>(n.size());
  for (int a = 0; a < g.dims; ++a) {
    if (n[a] < 4 || n[a] % 2 != 0) {
      throw Error("grid modes must be even and >= 4, got " +
                  std::to_string(n[a]) + " on axis " + std::to_string(a));
    }
    g.modes[a] = n[a];
  }
  return g;
}

void require_same_grid(const Grid& a, const Grid& b, const char* where) {
  if (!(a == b)) {
    throw GridMismatchError(std::string(where) + ": operands live on different grids");
  }
}

RealField::RealField(const Grid& g, std::vector<double> values)
    : grid_(g), values_(std::move(values)) {
  if (values_.size() != grid_.point_count()) {
    throw Error("field value count does not match grid point count");
  }
}

RealField& RealField::operator+=(const RealField& other) {
  require_same_grid(grid_, other.grid_, "RealField+=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

RealField& RealField::operator-=(const RealField& other) {
  require_same_grid(grid_, other.grid_, "RealField-=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

RealField& RealField::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

RealField& RealField::axpy(double s, const RealField& other) {
  require_same_grid(grid_, other.grid_, "RealField::axpy");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += s * other.values_[i];
  return *this;
}

RealField operator+(RealField a, const RealField& b) { return a += b; }
RealField operator-(RealField a, const RealField& b) { return a -= b; }
RealField operator*(double s, RealField a) { return a *= s; }

RealField multiply(const RealField& a, const RealField& b) {
  require_same_grid(a.grid(), b.grid(), "multiply");
  RealField out(a.grid());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

RealField map(const RealField& a, const std::function<double(double)>& fn) {
  RealField out(a.grid());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i]);
  return out;
}

RealField combine(double a, const RealField& f, double b, const RealField& g) {
  require_same_grid(f.grid(), g.grid(), "combine");
  RealField out(f.grid());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = a * f[i] + b * g[i];
  return out;
}

RealField combine(double a, const RealField& f, double b, const RealField& g,
                  double c, const RealField& h) {
  require_same_grid(f.grid(), g.grid(), "combine");
  require_same_grid(f.grid(), h.grid(), "combine");
  RealField out(f.grid());
  for (std::size_t i = 0; i < f.size(); ++i)
    out[i] = a * f[i] + b * g[i] + c * h[i];
  return out;
}

RealField sample(const Grid& g,
                 const std::function<double(double, double, double)>& fn) {
  RealField out(g);
  const int n0 = g.modes[0];
  const int n1 = g.dims > 1 ? g.modes[1] : 1;
  const int n2 = g.dims > 2 ? g.modes[2] : 1;
  std::size_t idx = 0;
  for (int i = 0; i < n0; ++i) {
    const double x = g.coord(0, i);
    for (int j = 0; j < n1; ++j) {
      const double y = g.dims > 1 ? g.coord(1, j) : 0.0;
      for (int k = 0; k < n2; ++k) {
        const double z = g.dims > 2 ? g.coord(2, k) : 0.0;
        out[idx++] = fn(x, y, z);
      }
    }
  }
  return out;
}

double max_abs(const RealField& f) {
  double m = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) m = std::max(m, std::abs(f[i]));
  return m;
}

bool all_finite(const RealField& f) {
  for (std::size_t i = 0; i < f.size(); ++i)
    if (!std::isfinite(f[i])) return false;
  return true;
}

}  // namespace cgflow
