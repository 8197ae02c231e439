#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

#include "oldroyd/calculus.hpp"
#include "oldroyd/field.hpp"
#include "oldroyd/leray.hpp"

namespace oldroyd::detail {

template <int Dim>
RealBuffer to_real(const SpectralCoeffs<Dim>& c) {
  RealBuffer v(c.grid().real_size());
  c.grid().backward(c.data(), v);
  return v;
}

// Overload for temporaries: the transform may scribble over them.
template <int Dim>
RealBuffer to_real(SpectralCoeffs<Dim>&& c) {
  RealBuffer v(c.grid().real_size());
  c.grid().backward_consuming(c.data(), v);
  return v;
}

template <int Dim>
SpectralCoeffs<Dim> to_coeffs(const Grid<Dim>& grid, const RealBuffer& v) {
  SpectralCoeffs<Dim> c(grid);
  grid.forward(v, c.data());
  return c.truncate();
}

template <int Dim, int K>
SpectralArray<Dim, K> truncated_copy(const SpectralArray<Dim, K>& c) {
  auto t = c;
  return spectral::truncate<Dim, K>(t);
}

/// Real-space samples of a band-limited velocity and its gradient (grad[i*Dim+j] = d_j v_i).
template <int Dim>
struct VelocityView {
  SpectralArray<Dim, Dim> spec;
  std::array<RealBuffer, Dim> v;
  std::array<RealBuffer, Dim * Dim> grad;
  double max_speed = 0.0;

  const Grid<Dim>& grid() const { return spec[0].grid(); }
};

template <int Dim>
VelocityView<Dim> make_velocity_view(const SpectralArray<Dim, Dim>& u) {
  VelocityView<Dim> w;
  w.spec = truncated_copy<Dim, Dim>(u);
  for (int i = 0; i < Dim; ++i) {
    w.v[i] = to_real(w.spec[i]);
    for (int j = 0; j < Dim; ++j) w.grad[i * Dim + j] = to_real(spectral::derivative(w.spec[i], j));
  }
  const std::size_t n = w.grid().real_size();
  double m2 = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    double s = 0.0;
    for (int i = 0; i < Dim; ++i) s += w.v[i][p] * w.v[i][p];
    m2 = std::max(m2, s);
  }
  w.max_speed = std::sqrt(m2);
  return w;
}

/// Real-space samples of a band-limited symmetric tensor and its gradient (grad[k*Dim+j] = d_j tau_k).
template <int Dim>
struct StressView {
  static constexpr int K = kSymComponents<Dim>;
  SpectralArray<Dim, K> spec;
  std::array<RealBuffer, K> tau;
  std::array<RealBuffer, K * Dim> grad;
};

template <int Dim>
StressView<Dim> make_stress_view(const SpectralArray<Dim, kSymComponents<Dim>>& t) {
  constexpr int K = kSymComponents<Dim>;
  StressView<Dim> w;
  w.spec = truncated_copy<Dim, K>(t);
  for (int k = 0; k < K; ++k) {
    w.tau[k] = to_real(w.spec[k]);
    for (int j = 0; j < Dim; ++j) w.grad[k * Dim + j] = to_real(spectral::derivative(w.spec[k], j));
  }
  return w;
}

/// Dealiased N(tau, v) = 2 alpha D(v)/We - (v.grad)tau - g_a(tau, grad v): the stress
/// right-hand side without the relaxation term -tau/We.
template <int Dim>
SpectralArray<Dim, kSymComponents<Dim>> stress_nonlinear(const VelocityView<Dim>& v, const StressView<Dim>& s,
                                                        const PhysicalParams& params) {
  constexpr int K = kSymComponents<Dim>;
  const Grid<Dim>& grid = v.grid();
  const std::size_t n = grid.real_size();
  std::array<RealBuffer, K> out;
  for (auto& o : out) o.resize(n);
  double t[K];
  double l[Dim * Dim];
  double g[K];
  for (std::size_t p = 0; p < n; ++p) {
    for (int k = 0; k < K; ++k) t[k] = s.tau[k][p];
    for (int k = 0; k < Dim * Dim; ++k) l[k] = v.grad[k][p];
    objective_term<Dim>(t, l, params.a, g);
    for (int k = 0; k < K; ++k) {
      double adv = 0.0;
      for (int j = 0; j < Dim; ++j) adv += v.v[j][p] * s.grad[k * Dim + j][p];
      out[k][p] = -adv - g[k];
    }
  }
  SpectralArray<Dim, K> res;
  const auto d = spectral::deformation<Dim>(v.spec);
  const double forcing = 2.0 * params.alpha / params.we;
  for (int k = 0; k < K; ++k) {
    res[k] = to_coeffs(grid, out[k]);
    res[k].axpy(forcing, d[k]);
  }
  return res;
}

/// Dealiased convective term (v.grad)v.
template <int Dim>
SpectralArray<Dim, Dim> convection(const VelocityView<Dim>& v) {
  const Grid<Dim>& grid = v.grid();
  const std::size_t n = grid.real_size();
  SpectralArray<Dim, Dim> res;
  RealBuffer c(n);
  for (int i = 0; i < Dim; ++i) {
    for (std::size_t p = 0; p < n; ++p) {
      double acc = 0.0;
      for (int j = 0; j < Dim; ++j) acc += v.v[j][p] * v.grad[i * Dim + j][p];
      c[p] = acc;
    }
    res[i] = to_coeffs(grid, c);
  }
  return res;
}

/// Projected momentum source P[div theta - Re (v.grad)v].
template <int Dim>
SpectralArray<Dim, Dim> momentum_source(const VelocityView<Dim>& v, const SpectralArray<Dim, kSymComponents<Dim>>& theta,
                                        double re) {
  auto f = spectral::divergence<Dim>(theta);
  const auto conv = convection(v);
  for (int i = 0; i < Dim; ++i) f[i].axpy(-re, conv[i]);
  spectral::project<Dim>(f);
  return f;
}

}  // namespace oldroyd::detail
