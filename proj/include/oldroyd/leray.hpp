#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>

#include "oldroyd/calculus.hpp"
#include "oldroyd/errors.hpp"
#include "oldroyd/field.hpp"

namespace oldroyd {

/// Nondimensional model constants.
struct PhysicalParams {
  double re = 1.0;     // Reynolds number
  double we = 1.0;     // Weissenberg number
  double alpha = 0.5;  // retardation ratio, weight of the elastic stress
  double a = 1.0;      // slip parameter of the objective derivative (1: upper convected)

  /// `decoupled` admits alpha = 0, where the stress no longer feels the velocity forcing; only
  /// the stress substep accepts that limit.
  void validate(bool decoupled = false) const {
    if (!(re > 0.0) || !std::isfinite(re)) throw InvalidArgument("Reynolds number must be positive");
    if (!(we > 0.0) || !std::isfinite(we)) throw InvalidArgument("Weissenberg number must be positive");
    if (!((decoupled ? alpha >= 0.0 : alpha > 0.0) && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
    if (!(a >= -1.0 && a <= 1.0)) throw InvalidArgument("slip parameter a must lie in [-1, 1]");
  }

  friend bool operator==(const PhysicalParams&, const PhysicalParams&) = default;
};

/// alpha = 1 - lambda2/lambda1 from relaxation time lambda1 and retardation time lambda2.
inline double derive_alpha(double lambda1, double lambda2) {
  if (!(lambda2 > 0.0) || !(lambda1 > lambda2) || !std::isfinite(lambda1)) {
    std::ostringstream os;
    os << "need lambda1 > lambda2 > 0, got lambda1 = " << lambda1 << ", lambda2 = " << lambda2;
    throw InvalidArgument(os.str());
  }
  return 1.0 - lambda2 / lambda1;
}

namespace spectral {

/// In-place Leray projection u -> u - k (k.u)/|k|^2; modes with k = 0 are left alone.
template <int Dim>
void project(SpectralArray<Dim, Dim>& u) {
  const auto& g = u[0].grid();
  std::array<std::span<const double>, Dim> k;
  for (int a = 0; a < Dim; ++a) k[a] = g.k_eff(a);
  const auto k2 = g.k2_eff();
  for (std::size_t s = 0; s < g.spectral_size(); ++s) {
    if (k2[s] == 0.0) continue;
    Complex kd = 0.0;
    for (int a = 0; a < Dim; ++a) kd += k[a][s] * u[a][s];
    kd /= k2[s];
    for (int a = 0; a < Dim; ++a) u[a][s] -= k[a][s] * kd;
  }
}

/// Gradient part (I - P)u.
template <int Dim>
SpectralArray<Dim, Dim> gradient_part(const SpectralArray<Dim, Dim>& u) {
  SpectralArray<Dim, Dim> p = u;
  project<Dim>(p);
  for (int a = 0; a < Dim; ++a) p[a] = u[a] - p[a];
  return p;
}

/// Multiplies every component by |k|^2.
template <int Dim, int K>
SpectralArray<Dim, K> negative_laplacian(SpectralArray<Dim, K> u) {
  const auto k2 = u[0].grid().k2();
  for (auto& c : u) {
    for (std::size_t s = 0; s < c.size(); ++s) c[s] *= k2[s];
  }
  return u;
}

/// Per-mode propagator of Re du/dt + (1 - alpha) A u = f with f frozen over one step.
template <int Dim>
class StokesPropagator {
 public:
  StokesPropagator(const Grid<Dim>& grid, double dt, const PhysicalParams& params)
      : grid_(grid), decay_(grid.spectral_size()), gain_(grid.spectral_size()) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("time step must be positive");
    params.validate();
    const double nu = 1.0 - params.alpha;
    const auto k2 = grid.k2();
    for (std::size_t s = 0; s < k2.size(); ++s) {
      if (k2[s] == 0.0) {
        decay_[s] = 1.0;
        gain_[s] = dt / params.re;
      } else {
        const double x = -nu * k2[s] * dt / params.re;
        decay_[s] = std::exp(x);
        gain_[s] = -std::expm1(x) / (nu * k2[s]);
      }
    }
  }

  /// u(dt) from u(0) and the (already projected) forcing.
  SpectralArray<Dim, Dim> apply(const SpectralArray<Dim, Dim>& u0, const SpectralArray<Dim, Dim>& f) const {
    SpectralArray<Dim, Dim> out;
    for (int a = 0; a < Dim; ++a) {
      out[a] = SpectralCoeffs<Dim>(grid_);
      for (std::size_t s = 0; s < decay_.size(); ++s) out[a][s] = decay_[s] * u0[a][s] + gain_[s] * f[a][s];
    }
    return out;
  }

 private:
  Grid<Dim> grid_;
  RealBuffer decay_;
  RealBuffer gain_;
};

}  // namespace spectral

/// Leray projection onto divergence-free fields.
template <int Dim>
VectorField<Dim> project(const VectorField<Dim>& u) {
  auto s = spectra(u);
  spectral::project<Dim>(s);
  return field_from_spectra<VectorField<Dim>, Dim, Dim>(std::move(s));
}

/// Stokes operator A u = -P Laplacian u (the multiplier |k|^2 on divergence-free fields).
template <int Dim>
VectorField<Dim> stokes_apply(const VectorField<Dim>& u) {
  auto s = spectral::negative_laplacian<Dim, Dim>(spectra(u));
  spectral::project<Dim>(s);
  return field_from_spectra<VectorField<Dim>, Dim, Dim>(std::move(s));
}

/// Pressure gradient (I - P)[div tau - Re (u.grad)u] balancing the momentum equation.
template <int Dim>
VectorField<Dim> pressure_gradient(const VectorField<Dim>& u, const SymTensorField<Dim>& tau,
                                   const PhysicalParams& params) {
  require_same_grid(u.grid(), tau.grid());
  params.validate();
  auto src = spectral::divergence<Dim>(spectra(tau));
  const auto conv = spectra(advect(u, u));
  for (int a = 0; a < Dim; ++a) src[a].axpy(-params.re, conv[a]);
  return field_from_spectra<VectorField<Dim>, Dim, Dim>(spectral::gradient_part<Dim>(src));
}

/// One step of Re du/dt + (1 - alpha) A u = P f with f frozen, solved exactly per Fourier mode.
template <int Dim>
VectorField<Dim> stokes_step(const VectorField<Dim>& u0, const VectorField<Dim>& f, double dt,
                             const PhysicalParams& params) {
  require_same_grid(u0.grid(), f.grid());
  const spectral::StokesPropagator<Dim> prop(u0.grid(), dt, params);
  auto fs = spectra(f);
  spectral::project<Dim>(fs);
  return field_from_spectra<VectorField<Dim>, Dim, Dim>(prop.apply(spectra(u0), fs));
}

}  // namespace oldroyd
