#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "cgflow/grid.hpp"

namespace cgflow {

// Constant-coefficient operator stored as one multiplier per retained Fourier
// mode (half-complex layout; conjugate symmetry is implicit).  Real-valued
// symbols (Laplacian, biharmonic, solver inverses) have zero imaginary part.
class SpectralOperator {
 public:
  SpectralOperator() = default;
  SpectralOperator(const Grid& g, std::vector<std::complex<double>> symbol);

  const Grid& grid() const { return grid_; }
  const std::vector<std::complex<double>>& symbol() const { return symbol_; }
  std::vector<std::complex<double>>& symbol() { return symbol_; }

 private:
  Grid grid_;
  std::vector<std::complex<double>> symbol_;
};

// Builds an operator from a function of the integer wavenumber vector.
SpectralOperator make_operator(
    const Grid& g,
    const std::function<std::complex<double>(const std::array<int, 3>&)>& fn);

SpectralOperator identity_op(const Grid& g, double scale = 1.0);
SpectralOperator laplacian_op(const Grid& g, double scale = 1.0);
SpectralOperator biharmonic_op(const Grid& g, double scale = 1.0);
// a*I + b*Lap + c*Lap^2 as a symbol.
SpectralOperator helmholtz_op(const Grid& g, double a, double b, double c);

// Symbol algebra (grids must match).
SpectralOperator operator+(const SpectralOperator& a, const SpectralOperator& b);
SpectralOperator operator*(const SpectralOperator& a, const SpectralOperator& b);
SpectralOperator operator*(double s, SpectralOperator a);
SpectralOperator shift(SpectralOperator a, double s);  // a + s*I

// f -> ifft(symbol .* fft(f)).  Result is exactly real in the half-complex
// representation; inputs are untouched.
RealField apply_operator(const SpectralOperator& op, const RealField& f);

// Solves op*u = rhs mode by mode.  Modes where the symbol vanishes are
// accepted only when the corresponding rhs component is negligible (the
// component is then dropped); otherwise a SingularOperatorError names the
// offending wavenumber.
RealField solve_operator(const SpectralOperator& op, const RealField& rhs);

// (a*I + b*Lap + c*Lap^2) u = rhs.
RealField solve_const_coeff(double a, double b, double c, const RealField& rhs);

// Spectral partial derivative along one axis (Nyquist mode zeroed).
RealField derivative(const RealField& f, int axis);
// sum_i (d_i f)^2, each derivative spectral.
RealField gradient_squared(const RealField& f);
RealField laplacian_of(const RealField& f);
// div(v) for a vector of per-axis component fields.
RealField divergence(const std::vector<RealField>& v);

// Rectangle rule; spectrally accurate for smooth periodic integrands.
double integrate(const RealField& f);
// L2 inner product (f, g).
double inner(const RealField& f, const RealField& g);
double l2_norm_sq(const RealField& f);

// Forward transform normalized so that f(x) = sum_k c_k exp(i k.x); exposed
// for diagnostics and tests (Parseval checks, mode inspection).
std::vector<std::complex<double>> forward_coefficients(const RealField& f);

// Integer wavenumbers of the half-complex mode at flat index m.
std::array<int, 3> mode_wavenumbers(const Grid& g, std::size_t m);
// Multiplicity of the mode when expanded to the full complex set (1 or 2).
int mode_multiplicity(const Grid& g, std::size_t m);

// 2/3-rule dealiasing projector (optional robustness tool; identity on modes
// with |k_i| < N_i/3, zero elsewhere).
SpectralOperator dealias_projector(const Grid& g);

}  // namespace cgflow
