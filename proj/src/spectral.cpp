#include "cgflow/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

namespace cgflow {
namespace {

// One forward (r2c) and one backward (c2r) plan per grid shape.  Plans are
// created with FFTW_UNALIGNED so they can be reused on any buffer through the
// new-array execute interface, which is safe to call concurrently; the
// planner itself is serialized behind a mutex.
struct PlanSet {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

const PlanSet& plans_for(const Grid& g) {
  static std::mutex mu;
  static std::map<std::array<int, 4>, PlanSet> cache;
  std::array<int, 4> key{g.dims, g.modes[0], g.modes[1], g.modes[2]};
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  std::vector<double> real_buf(g.point_count());
  std::vector<std::complex<double>> cplx_buf(g.spectral_count());
  int n[3] = {g.modes[0], g.modes[1], g.modes[2]};
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  PlanSet p;
  p.fwd = fftw_plan_dft_r2c(g.dims, n, real_buf.data(),
                            reinterpret_cast<fftw_complex*>(cplx_buf.data()),
                            flags);
  p.bwd = fftw_plan_dft_c2r(g.dims, n,
                            reinterpret_cast<fftw_complex*>(cplx_buf.data()),
                            real_buf.data(), flags);
  if (p.fwd == nullptr || p.bwd == nullptr) {
    throw Error("failed to create FFT plans for grid");
  }
  return cache.emplace(key, p).first->second;
}

std::vector<std::complex<double>> forward_raw(const RealField& f) {
  const PlanSet& p = plans_for(f.grid());
  std::vector<double> in(f.values());  // r2c may scribble on its input
  std::vector<std::complex<double>> out(f.grid().spectral_count());
  fftw_execute_dft_r2c(p.fwd, in.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

RealField backward_raw(const Grid& g, std::vector<std::complex<double>>& spec) {
  const PlanSet& p = plans_for(g);
  RealField out(g);
  // c2r destroys its input; spec is a scratch buffer by contract.
  fftw_execute_dft_c2r(p.bwd, reinterpret_cast<fftw_complex*>(spec.data()),
                       out.data());
  const double inv = 1.0 / static_cast<double>(g.point_count());
  out *= inv;
  return out;
}

}  // namespace

SpectralOperator::SpectralOperator(const Grid& g,
                                   std::vector<std::complex<double>> symbol)
    : grid_(g), symbol_(std::move(symbol)) {
  if (symbol_.size() != grid_.spectral_count()) {
    throw Error("spectral symbol count does not match grid mode count");
  }
}

std::array<int, 3> mode_wavenumbers(const Grid& g, std::size_t m) {
  std::array<int, 3> k{0, 0, 0};
  const int d = g.dims;
  std::size_t rest = m;
  // Row-major half-complex layout: last axis is the halved one.
  std::array<std::size_t, 3> ext{1, 1, 1};
  for (int a = 0; a < d - 1; ++a) ext[a] = static_cast<std::size_t>(g.modes[a]);
  ext[d - 1] = static_cast<std::size_t>(g.modes[d - 1] / 2 + 1);
  for (int a = d - 1; a >= 0; --a) {
    const std::size_t idx = rest % ext[a];
    rest /= ext[a];
    if (a == d - 1) {
      k[a] = static_cast<int>(idx);  // 0 .. N/2
    } else {
      const int n = g.modes[a];
      k[a] = static_cast<int>(idx) < n / 2 ? static_cast<int>(idx)
                                           : static_cast<int>(idx) - n;
    }
  }
  return k;
}

int mode_multiplicity(const Grid& g, std::size_t m) {
  const auto k = mode_wavenumbers(g, m);
  const int last = g.dims - 1;
  // Modes with k_last == 0 or k_last == N/2 are their own conjugates.
  if (k[last] == 0 || k[last] == g.modes[last] / 2) return 1;
  return 2;
}

SpectralOperator make_operator(
    const Grid& g,
    const std::function<std::complex<double>(const std::array<int, 3>&)>& fn) {
  std::vector<std::complex<double>> sym(g.spectral_count());
  for (std::size_t m = 0; m < sym.size(); ++m) sym[m] = fn(mode_wavenumbers(g, m));
  return SpectralOperator(g, std::move(sym));
}

SpectralOperator identity_op(const Grid& g, double scale) {
  return make_operator(g, [scale](const std::array<int, 3>&) {
    return std::complex<double>(scale, 0.0);
  });
}

SpectralOperator laplacian_op(const Grid& g, double scale) {
  return make_operator(g, [scale](const std::array<int, 3>& k) {
    const double k2 = static_cast<double>(k[0]) * k[0] +
                      static_cast<double>(k[1]) * k[1] +
                      static_cast<double>(k[2]) * k[2];
    return std::complex<double>(-scale * k2, 0.0);
  });
}

SpectralOperator biharmonic_op(const Grid& g, double scale) {
  return make_operator(g, [scale](const std::array<int, 3>& k) {
    const double k2 = static_cast<double>(k[0]) * k[0] +
                      static_cast<double>(k[1]) * k[1] +
                      static_cast<double>(k[2]) * k[2];
    return std::complex<double>(scale * k2 * k2, 0.0);
  });
}

SpectralOperator helmholtz_op(const Grid& g, double a, double b, double c) {
  return make_operator(g, [a, b, c](const std::array<int, 3>& k) {
    const double k2 = static_cast<double>(k[0]) * k[0] +
                      static_cast<double>(k[1]) * k[1] +
                      static_cast<double>(k[2]) * k[2];
    return std::complex<double>(a - b * k2 + c * k2 * k2, 0.0);
  });
}

SpectralOperator operator+(const SpectralOperator& a, const SpectralOperator& b) {
  require_same_grid(a.grid(), b.grid(), "SpectralOperator+");
  std::vector<std::complex<double>> sym(a.symbol());
  for (std::size_t i = 0; i < sym.size(); ++i) sym[i] += b.symbol()[i];
  return SpectralOperator(a.grid(), std::move(sym));
}

SpectralOperator operator*(const SpectralOperator& a, const SpectralOperator& b) {
  require_same_grid(a.grid(), b.grid(), "SpectralOperator*");
  std::vector<std::complex<double>> sym(a.symbol());
  for (std::size_t i = 0; i < sym.size(); ++i) sym[i] *= b.symbol()[i];
  return SpectralOperator(a.grid(), std::move(sym));
}

SpectralOperator operator*(double s, SpectralOperator a) {
  for (auto& v : a.symbol()) v *= s;
  return a;
}

SpectralOperator shift(SpectralOperator a, double s) {
  for (auto& v : a.symbol()) v += s;
  return a;
}

RealField apply_operator(const SpectralOperator& op, const RealField& f) {
  require_same_grid(op.grid(), f.grid(), "apply_operator");
  auto spec = forward_raw(f);
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= op.symbol()[i];
  return backward_raw(f.grid(), spec);
}

RealField solve_operator(const SpectralOperator& op, const RealField& rhs) {
  require_same_grid(op.grid(), rhs.grid(), "solve_operator");
  auto spec = forward_raw(rhs);
  double sym_scale = 0.0, rhs_scale = 0.0;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    sym_scale = std::max(sym_scale, std::abs(op.symbol()[i]));
    rhs_scale = std::max(rhs_scale, std::abs(spec[i]));
  }
  const double sym_tiny = 1e-14 * sym_scale;
  const double rhs_tiny = 1e-12 * rhs_scale;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const std::complex<double> den = op.symbol()[i];
    if (std::abs(den) <= sym_tiny) {
      if (std::abs(spec[i]) > rhs_tiny) {
        const auto k = mode_wavenumbers(op.grid(), i);
        std::ostringstream msg;
        msg << "singular operator: zero symbol at mode (" << k[0];
        for (int a = 1; a < op.grid().dims; ++a) msg << ", " << k[a];
        msg << ") with nonzero right-hand side";
        throw SingularOperatorError(
            msg.str(), std::vector<int>(k.begin(), k.begin() + op.grid().dims));
      }
      spec[i] = 0.0;
    } else {
      spec[i] /= den;
    }
  }
  return backward_raw(rhs.grid(), spec);
}

RealField solve_const_coeff(double a, double b, double c, const RealField& rhs) {
  return solve_operator(helmholtz_op(rhs.grid(), a, b, c), rhs);
}

RealField derivative(const RealField& f, int axis) {
  if (axis < 0 || axis >= f.grid().dims) {
    throw Error("derivative axis out of range");
  }
  const Grid& g = f.grid();
  auto spec = forward_raw(f);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const auto k = mode_wavenumbers(g, i);
    // The unmatched Nyquist mode carries no usable odd-derivative content.
    const bool nyquist = (axis == g.dims - 1) ? (k[axis] == g.modes[axis] / 2)
                                              : (k[axis] == -g.modes[axis] / 2);
    if (nyquist) {
      spec[i] = 0.0;
    } else {
      spec[i] *= std::complex<double>(0.0, static_cast<double>(k[axis]));
    }
  }
  return backward_raw(g, spec);
}

RealField gradient_squared(const RealField& f) {
  RealField out(f.grid());
  for (int a = 0; a < f.grid().dims; ++a) {
    const RealField d = derivative(f, a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += d[i] * d[i];
  }
  return out;
}

RealField laplacian_of(const RealField& f) {
  return apply_operator(laplacian_op(f.grid()), f);
}

RealField divergence(const std::vector<RealField>& v) {
  if (v.empty()) throw Error("divergence of empty vector field");
  if (static_cast<int>(v.size()) != v[0].grid().dims) {
    throw Error("divergence: component count must equal grid dimension");
  }
  RealField out(v[0].grid());
  for (int a = 0; a < v[0].grid().dims; ++a) {
    require_same_grid(v[a].grid(), out.grid(), "divergence");
    out += derivative(v[a], a);
  }
  return out;
}

double integrate(const RealField& f) {
  KahanAccumulator acc;
  for (std::size_t i = 0; i < f.size(); ++i) acc.add(f[i]);
  return acc.sum() * f.grid().cell_volume();
}

double inner(const RealField& f, const RealField& g) {
  require_same_grid(f.grid(), g.grid(), "inner");
  KahanAccumulator acc;
  for (std::size_t i = 0; i < f.size(); ++i) acc.add(f[i] * g[i]);
  return acc.sum() * f.grid().cell_volume();
}

double l2_norm_sq(const RealField& f) { return inner(f, f); }

std::vector<std::complex<double>> forward_coefficients(const RealField& f) {
  auto spec = forward_raw(f);
  const double inv = 1.0 / static_cast<double>(f.grid().point_count());
  for (auto& c : spec) c *= inv;
  return spec;
}

SpectralOperator dealias_projector(const Grid& g) {
  return make_operator(g, [&g](const std::array<int, 3>& k) {
    for (int a = 0; a < g.dims; ++a) {
      if (3 * std::abs(k[a]) >= g.modes[a]) return std::complex<double>(0.0);
    }
    return std::complex<double>(1.0);
  });
}

}  // namespace cgflow
