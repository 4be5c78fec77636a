#include "cgflow/initial_conditions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "cgflow/spectral.hpp"

namespace cgflow {
namespace {

constexpr double kPi = std::numbers::pi;

double get(const std::map<std::string, double>& p, const std::string& key,
           double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

void check_keys(const std::string& name,
                const std::map<std::string, double>& params) {
  const auto allowed = initial_condition_params(name);
  for (const auto& [key, value] : params) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error("initial condition '" + name + "' does not take parameter '" +
                  key + "'");
    }
  }
}

RealField tanh_circles(const Grid& g, const std::vector<double>& r,
                       const std::vector<double>& cx,
                       const std::vector<double>& cy,
                       const std::vector<double>& cz, double eps,
                       double offset) {
  const double width = std::sqrt(2.0) * eps;
  return sample(g, [&](double x, double y, double z) {
    double v = offset;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double dx = x - cx[i];
      const double dy = y - cy[i];
      const double dz = z - cz[i];
      const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
      v += std::tanh((r[i] - dist) / width);
    }
    return v;
  });
}

RealField random_trig(const Grid& g, double amplitude, int cutoff, double decay,
                      double mean, unsigned long seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  struct Mode {
    int k[3];
    double a, b, weight;
  };
  std::vector<Mode> modes;
  const int k1 = cutoff;
  const int k2 = g.dims > 1 ? cutoff : 0;
  const int k3 = g.dims > 2 ? cutoff : 0;
  for (int i = 0; i <= k1; ++i) {
    for (int j = -k2; j <= k2; ++j) {
      for (int k = -k3; k <= k3; ++k) {
        if (i == 0 && j == 0 && k == 0) continue;
        // Half-space selection avoids double-counting conjugate pairs.
        if (i == 0 && (j < 0 || (j == 0 && k < 0))) continue;
        Mode m;
        m.k[0] = i;
        m.k[1] = j;
        m.k[2] = k;
        const double k2n = static_cast<double>(i) * i +
                           static_cast<double>(j) * j +
                           static_cast<double>(k) * k;
        m.a = unif(rng);
        m.b = unif(rng);
        m.weight = 1.0 / std::pow(1.0 + k2n, 0.5 * decay);
        modes.push_back(m);
      }
    }
  }
  RealField f = sample(g, [&](double x, double y, double z) {
    double v = 0.0;
    for (const auto& m : modes) {
      const double phase = m.k[0] * x + m.k[1] * y + m.k[2] * z;
      v += m.weight * (m.a * std::cos(phase) + m.b * std::sin(phase));
    }
    return v;
  });
  const double scale = max_abs(f);
  if (scale > 0.0) f *= amplitude / scale;
  for (std::size_t i = 0; i < f.size(); ++i) f[i] += mean;
  return f;
}

std::vector<RealField> partition_markers(const Grid& g, int m,
                                         double smooth_cells) {
  if (g.dims != 2) throw Error("partition_markers is defined on 2D grids");
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(m))));
  const int rows = (m + cols - 1) / cols;
  std::vector<RealField> fields;
  const double wx = 2.0 * kPi / cols;
  const double wy = 2.0 * kPi / rows;
  // Smoothing width in physical units; zero keeps sharp indicator edges.
  const double sw = smooth_cells * g.spacing(0);
  for (int i = 0; i < m; ++i) {
    const int cx = i % cols;
    const int cy = i / cols;
    const double x0 = -kPi + cx * wx, x1 = x0 + wx;
    const double y0 = -kPi + cy * wy, y1 = y0 + wy;
    RealField f = sample(g, [&](double x, double y, double) {
      const double marker = static_cast<double>(i + 1);
      if (sw <= 0.0) {
        return (x >= x0 && x < x1 && y >= y0 && y < y1) ? marker : 0.0;
      }
      auto wall = [&](double s, double a, double b) {
        return 0.5 * (std::tanh((s - a) / sw) - std::tanh((s - b) / sw));
      };
      return marker * wall(x, x0, x1) * wall(y, y0, y1);
    });
    const double norm = std::sqrt(l2_norm_sq(f));
    if (norm == 0.0) throw Error("partition marker region is empty");
    f *= 1.0 / norm;
    fields.push_back(std::move(f));
  }
  return fields;
}

}  // namespace

std::vector<std::string> initial_condition_params(const std::string& name) {
  if (name == "constant") return {"value"};
  if (name == "two_circles_2d")
    return {"r1", "r2", "x1", "x2", "y1", "y2", "epsilon"};
  if (name == "four_spheres_3d" || name == "six_spheres_3d")
    return {"radius", "epsilon"};
  if (name == "smooth_trig") return {"amplitude", "offset"};
  if (name == "random_smooth")
    return {"amplitude", "cutoff", "decay", "mean", "seed", "count",
            "normalize"};
  if (name == "partition_markers") return {"m", "smooth_cells"};
  throw Error("unknown initial condition '" + name + "'");
}

bool is_initial_condition(const std::string& name) {
  static const char* names[] = {"constant",       "two_circles_2d",
                                "four_spheres_3d", "six_spheres_3d",
                                "smooth_trig",     "random_smooth",
                                "partition_markers"};
  for (const char* n : names) {
    if (name == n) return true;
  }
  return false;
}

std::vector<RealField> builtin_initial_condition(
    const std::string& name, const std::map<std::string, double>& params,
    const Grid& grid) {
  check_keys(name, params);

  if (name == "constant") {
    return {RealField(grid, get(params, "value", 0.0))};
  }
  if (name == "two_circles_2d") {
    if (grid.dims != 2) throw Error("two_circles_2d needs a 2D grid");
    const double eps = get(params, "epsilon", 6.0 * kPi / 128.0);
    return {tanh_circles(grid,
                         {get(params, "r1", 0.28 * kPi),
                          get(params, "r2", 0.28 * kPi)},
                         {get(params, "x1", 0.0), get(params, "x2", 0.0)},
                         {get(params, "y1", 0.35 * kPi),
                          get(params, "y2", -0.35 * kPi)},
                         {0.0, 0.0}, eps, 1.0)};
  }
  if (name == "four_spheres_3d") {
    if (grid.dims != 3) throw Error("four_spheres_3d needs a 3D grid");
    const double eps = get(params, "epsilon", 6.0 * kPi / 128.0);
    const double r = get(params, "radius", kPi / 6.0);
    return {tanh_circles(grid, {r, r, r, r}, {0.0, 0.0, 0.0, 0.0},
                         {kPi / 4.0, -kPi / 4.0, 3.0 * kPi / 4.0,
                          -3.0 * kPi / 4.0},
                         {0.0, 0.0, 0.0, 0.0}, eps, 3.0)};
  }
  if (name == "six_spheres_3d") {
    if (grid.dims != 3) throw Error("six_spheres_3d needs a 3D grid");
    const double eps = get(params, "epsilon", 6.0 * kPi / 128.0);
    const double r = get(params, "radius", kPi / 6.0);
    return {tanh_circles(
        grid, {r, r, r, r, r, r},
        {-kPi / 4.0, kPi / 4.0, 0.0, kPi / 2.0, -kPi / 2.0, 0.0},
        {-kPi / 4.0, -kPi / 4.0, kPi / 4.0, kPi / 4.0, kPi / 4.0,
         -3.0 * kPi / 4.0},
        {0.0, 0.0, 0.0, 0.0, 0.0, 0.0}, eps, 5.0)};
  }
  if (name == "smooth_trig") {
    if (grid.dims != 2) throw Error("smooth_trig needs a 2D grid");
    const double amp = get(params, "amplitude", 0.25);
    const double off = get(params, "offset", 0.48);
    return {sample(grid, [&](double x, double y, double) {
      return amp * std::sin(2.0 * x) * std::cos(2.0 * y) + off;
    })};
  }
  if (name == "random_smooth") {
    const int count = static_cast<int>(get(params, "count", 1.0));
    if (count < 1) throw Error("random_smooth: count must be >= 1");
    const double amp = get(params, "amplitude", 0.1);
    const int cutoff = static_cast<int>(
        get(params, "cutoff",
            static_cast<double>(std::max(2, grid.modes[0] / 3))));
    const double decay = get(params, "decay", 1.0);
    const double mean = get(params, "mean", 0.0);
    const bool normalize = get(params, "normalize", 0.0) != 0.0;
    const unsigned long seed =
        static_cast<unsigned long>(get(params, "seed", 0.0));
    std::vector<RealField> out;
    for (int i = 0; i < count; ++i) {
      RealField f = random_trig(grid, amp, cutoff, decay, mean,
                                seed + static_cast<unsigned long>(i));
      if (normalize) {
        const double norm = std::sqrt(l2_norm_sq(f));
        if (norm == 0.0) throw Error("random_smooth produced a zero field");
        f *= 1.0 / norm;
      }
      out.push_back(std::move(f));
    }
    return out;
  }
  if (name == "partition_markers") {
    const int m = static_cast<int>(get(params, "m", 0.0));
    if (m < 1) throw Error("partition_markers needs m >= 1");
    return partition_markers(grid, m, get(params, "smooth_cells", 0.0));
  }
  throw Error("unknown initial condition '" + name + "'");
}

}  // namespace cgflow
