#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <type_traits>

#include "oldroyd/errors.hpp"
#include "oldroyd/field.hpp"

namespace oldroyd {

namespace spectral {

/// d/dx_axis as a Fourier multiplier i*k (Nyquist mode dropped).
template <int Dim>
SpectralCoeffs<Dim> derivative(const SpectralCoeffs<Dim>& c, int axis) {
  SpectralCoeffs<Dim> out(c.grid());
  const auto k = c.grid().k_eff(axis);
  for (std::size_t s = 0; s < c.size(); ++s) out[s] = Complex(-k[s] * c[s].imag(), k[s] * c[s].real());
  return out;
}

/// out += scale * d/dx_axis c
template <int Dim>
void add_derivative(SpectralCoeffs<Dim>& out, const SpectralCoeffs<Dim>& c, int axis, double scale = 1.0) {
  const auto k = c.grid().k_eff(axis);
  for (std::size_t s = 0; s < c.size(); ++s) {
    const double ks = scale * k[s];
    out[s] += Complex(-ks * c[s].imag(), ks * c[s].real());
  }
}

template <int Dim>
SpectralCoeffs<Dim> laplacian(const SpectralCoeffs<Dim>& c) {
  SpectralCoeffs<Dim> out(c.grid());
  const auto k2 = c.grid().k2();
  for (std::size_t s = 0; s < c.size(); ++s) out[s] = -k2[s] * c[s];
  return out;
}

template <int Dim>
SpectralCoeffs<Dim> divergence(const SpectralArray<Dim, Dim>& v) {
  SpectralCoeffs<Dim> out(v[0].grid());
  for (int j = 0; j < Dim; ++j) add_derivative(out, v[j], j);
  return out;
}

/// Row-wise divergence (div tau)_i = d_j tau_ij of a symmetric tensor.
template <int Dim>
SpectralArray<Dim, Dim> divergence(const SpectralArray<Dim, kSymComponents<Dim>>& tau) {
  SpectralArray<Dim, Dim> out;
  for (int i = 0; i < Dim; ++i) {
    out[i] = SpectralCoeffs<Dim>(tau[0].grid());
    for (int j = 0; j < Dim; ++j) add_derivative(out[i], tau[SymTensorField<Dim>::index(i, j)], j);
  }
  return out;
}

/// Symmetric part of the velocity gradient, D_ij = (d_j u_i + d_i u_j) / 2.
template <int Dim>
SpectralArray<Dim, kSymComponents<Dim>> deformation(const SpectralArray<Dim, Dim>& u) {
  SpectralArray<Dim, kSymComponents<Dim>> out;
  for (int i = 0; i < Dim; ++i) {
    for (int j = i; j < Dim; ++j) {
      auto& d = out[SymTensorField<Dim>::index(i, j)];
      d = SpectralCoeffs<Dim>(u[0].grid());
      add_derivative(d, u[i], j, 0.5);
      add_derivative(d, u[j], i, 0.5);
    }
  }
  return out;
}

/// Curl components: one (the out-of-plane value) in 2D, three in 3D.
template <int Dim>
auto curl(const SpectralArray<Dim, Dim>& u) {
  if constexpr (Dim == 2) {
    SpectralArray<2, 1> w;
    w[0] = derivative(u[1], 0);
    add_derivative(w[0], u[0], 1, -1.0);
    return w;
  } else {
    SpectralArray<3, 3> w;
    for (int i = 0; i < 3; ++i) {
      const int j = (i + 1) % 3;
      const int k = (i + 2) % 3;
      w[i] = derivative(u[k], j);
      add_derivative(w[i], u[j], k, -1.0);
    }
    return w;
  }
}

/// Squared H^m norm of one component: Plancherel sum with multiplier (1 + |k|^2)^m.
template <int Dim>
double sobolev_norm_squared(const SpectralCoeffs<Dim>& c, int m) {
  if (m < 0) throw InvalidArgument("Sobolev order must be nonnegative");
  const auto& g = c.grid();
  const auto w = g.weight();
  const auto k2 = g.k2();
  double acc = 0.0;
  for (std::size_t s = 0; s < c.size(); ++s) {
    const double mult = m == 0 ? 1.0 : std::pow(1.0 + k2[s], m);
    acc += w[s] * mult * std::norm(c[s]);
  }
  return acc * g.volume();
}

/// Homogeneous multiplier |k|^(2m) instead of (1+|k|^2)^m.
template <int Dim>
double homogeneous_norm_squared(const SpectralCoeffs<Dim>& c, int m) {
  const auto& g = c.grid();
  const auto w = g.weight();
  const auto k2 = g.k2();
  double acc = 0.0;
  for (std::size_t s = 0; s < c.size(); ++s) acc += w[s] * std::pow(k2[s], m) * std::norm(c[s]);
  return acc * g.volume();
}

/// Plain sum over components (vectors, full tensors).
template <int Dim, int K>
double norm_squared(const SpectralArray<Dim, K>& c, int m = 0) {
  double acc = 0.0;
  for (int i = 0; i < K; ++i) acc += sobolev_norm_squared(c[i], m);
  return acc;
}

/// Frobenius L2 norm squared of a symmetric tensor (off-diagonal entries count twice).
template <int Dim>
double sym_norm_squared(const SpectralArray<Dim, kSymComponents<Dim>>& c, int m = 0) {
  double acc = 0.0;
  for (int i = 0; i < kSymComponents<Dim>; ++i) {
    acc += SymTensorField<Dim>::multiplicity(i) * sobolev_norm_squared(c[i], m);
  }
  return acc;
}

/// L2 norm squared of the full gradient of a vector field.
template <int Dim>
double gradient_norm_squared(const SpectralArray<Dim, Dim>& u, int m = 0) {
  const auto& g = u[0].grid();
  const auto w = g.weight();
  const auto k2 = g.k2();
  std::array<std::span<const double>, Dim> k;
  for (int a = 0; a < Dim; ++a) k[a] = g.k_eff(a);
  double acc = 0.0;
  for (std::size_t s = 0; s < g.spectral_size(); ++s) {
    double ke2 = 0.0;
    for (int a = 0; a < Dim; ++a) ke2 += k[a][s] * k[a][s];
    double amp = 0.0;
    for (int i = 0; i < Dim; ++i) amp += std::norm(u[i][s]);
    const double mult = m == 0 ? 1.0 : std::pow(1.0 + k2[s], m);
    acc += w[s] * mult * ke2 * amp;
  }
  return acc * g.volume();
}

template <int Dim, int K>
SpectralArray<Dim, K>& truncate(SpectralArray<Dim, K>& c) {
  for (auto& x : c) x.truncate();
  return c;
}

}  // namespace spectral

namespace detail {

/// Samples of `f` with the 2/3-rule applied (the stored samples when already band-limited).
template <int Dim>
ScalarField<Dim> band_limited(const ScalarField<Dim>& f) {
  const auto& c = f.spectrum();
  if (c.band_limited()) return f;
  auto t = c;
  return from_spectral(std::move(t.truncate()));
}

template <int Dim, int K>
std::array<ScalarField<Dim>, K> band_limited(const std::array<ScalarField<Dim>, K>& f) {
  std::array<ScalarField<Dim>, K> out;
  for (int i = 0; i < K; ++i) out[i] = band_limited(f[i]);
  return out;
}

template <int Dim>
ScalarField<Dim> truncated_result(RealBuffer values, const Grid<Dim>& grid) {
  ScalarField<Dim> f(grid, std::move(values));
  if (!grid.dealias()) return f;
  auto c = f.spectrum();
  return from_spectral(std::move(c.truncate()));
}

}  // namespace detail

/// Gradient of a scalar, (d_0 f, ..., d_{Dim-1} f).
template <int Dim>
VectorField<Dim> gradient(const ScalarField<Dim>& f) {
  VectorField<Dim> g;
  for (int j = 0; j < Dim; ++j) g[j] = from_spectral(spectral::derivative(f.spectrum(), j));
  return g;
}

/// Velocity gradient with (grad u)_ij = d_j u_i.
template <int Dim>
TensorField<Dim> gradient(const VectorField<Dim>& u) {
  TensorField<Dim> g;
  for (int i = 0; i < Dim; ++i)
    for (int j = 0; j < Dim; ++j) g(i, j) = from_spectral(spectral::derivative(u[i].spectrum(), j));
  return g;
}

template <int Dim>
ScalarField<Dim> divergence(const VectorField<Dim>& u) {
  return from_spectral(spectral::divergence<Dim>(spectra(u)));
}

/// Row-wise divergence (div tau)_i = d_j tau_ij.
template <int Dim>
VectorField<Dim> divergence(const SymTensorField<Dim>& tau) {
  return field_from_spectra<VectorField<Dim>, Dim, Dim>(spectral::divergence<Dim>(spectra(tau)));
}

template <int Dim>
ScalarField<Dim> laplacian(const ScalarField<Dim>& f) {
  return from_spectral(spectral::laplacian(f.spectrum()));
}

template <int Dim>
using CurlField = std::conditional_t<Dim == 2, ScalarField<2>, VectorField<3>>;

/// Curl: the scalar d_0 u_1 - d_1 u_0 in 2D, the usual vector in 3D.
template <int Dim>
CurlField<Dim> curl(const VectorField<Dim>& u) {
  auto w = spectral::curl<Dim>(spectra(u));
  if constexpr (Dim == 2) {
    return from_spectral(std::move(w[0]));
  } else {
    return field_from_spectra<VectorField<3>, 3, 3>(std::move(w));
  }
}

/// Symmetric part (L + L^T)/2 of a gradient tensor.
template <int Dim>
SymTensorField<Dim> deformation(const TensorField<Dim>& grad) {
  SymTensorField<Dim> d;
  for (int i = 0; i < Dim; ++i) {
    for (int j = i; j < Dim; ++j) {
      if (i == j) {
        d(i, j) = grad(i, i);
      } else {
        d(i, j) = 0.5 * (grad(i, j) + grad(j, i));
      }
    }
  }
  return d;
}

template <int Dim>
SymTensorField<Dim> deformation(const VectorField<Dim>& u) {
  return deformation(gradient(u));
}

/// Antisymmetric part (L - L^T)/2 of a gradient tensor.
template <int Dim>
TensorField<Dim> vorticity(const TensorField<Dim>& grad) {
  TensorField<Dim> w;
  const Grid<Dim>& grid = grad.grid();
  for (int i = 0; i < Dim; ++i) {
    for (int j = 0; j < Dim; ++j) {
      w(i, j) = i == j ? ScalarField<Dim>(grid) : 0.5 * (grad(i, j) - grad(j, i));
    }
  }
  return w;
}

template <int Dim>
TensorField<Dim> vorticity(const VectorField<Dim>& u) {
  return vorticity(gradient(u));
}

namespace detail {

/// Pointwise g_a(tau, L) = tau W - W tau - a (D tau + tau D) with D, W the symmetric and
/// antisymmetric parts of L. `tau` and `out` hold the upper triangle, `grad` is row-major.
template <int Dim>
inline void objective_term(const double* tau, const double* grad, double a, double* out) {
  // With A = L tau and B = tau L the term equals
  // ((1 - a)/2)(B + B^T) - ((1 + a)/2)(A + A^T), which needs two products instead of four.
  double t[Dim][Dim];
  for (int i = 0; i < Dim; ++i)
    for (int j = 0; j < Dim; ++j) t[i][j] = tau[SymTensorField<Dim>::index(i, j)];
  double lt[Dim][Dim];
  double tl[Dim][Dim];
  for (int i = 0; i < Dim; ++i) {
    for (int j = 0; j < Dim; ++j) {
      double x = 0.0;
      double y = 0.0;
      for (int k = 0; k < Dim; ++k) {
        x += grad[i * Dim + k] * t[k][j];
        y += t[i][k] * grad[k * Dim + j];
      }
      lt[i][j] = x;
      tl[i][j] = y;
    }
  }
  const double up = 0.5 * (1.0 + a);
  const double lo = 0.5 * (1.0 - a);
  for (int i = 0; i < Dim; ++i)
    for (int j = i; j < Dim; ++j)
      out[SymTensorField<Dim>::index(i, j)] = lo * (tl[i][j] + tl[j][i]) - up * (lt[i][j] + lt[j][i]);
}

inline void check_slip(double a) {
  if (!(a >= -1.0 && a <= 1.0)) throw InvalidArgument("slip parameter a must lie in [-1, 1]");
}

}  // namespace detail

/// Objective-derivative term g_a(tau, grad u), evaluated pointwise on the grid samples.
template <int Dim>
SymTensorField<Dim> g_a(const SymTensorField<Dim>& tau, const TensorField<Dim>& grad, double a) {
  detail::check_slip(a);
  require_same_grid(tau.grid(), grad.grid());
  constexpr int K = kSymComponents<Dim>;
  const Grid<Dim>& grid = tau.grid();
  std::array<RealBuffer, K> out;
  for (auto& o : out) o.resize(grid.real_size());
  double t[K];
  double l[Dim * Dim];
  double r[K];
  for (std::size_t p = 0; p < grid.real_size(); ++p) {
    for (int k = 0; k < K; ++k) t[k] = tau.c[k][p];
    for (int k = 0; k < Dim * Dim; ++k) l[k] = grad.c[k][p];
    detail::objective_term<Dim>(t, l, a, r);
    for (int k = 0; k < K; ++k) out[k][p] = r[k];
  }
  SymTensorField<Dim> g;
  for (int k = 0; k < K; ++k) g.c[k] = ScalarField<Dim>(grid, std::move(out[k]));
  return g;
}

/// Product a*b with the 2/3 rule: inputs and output are truncated (plain product when off).
template <int Dim>
ScalarField<Dim> product(const ScalarField<Dim>& a, const ScalarField<Dim>& b) {
  require_same_grid(a.grid(), b.grid());
  const Grid<Dim>& grid = a.grid();
  if (!grid.dealias()) return pointwise<Dim>(a, b, std::multiplies<>{});
  const auto at = detail::band_limited(a);
  const auto bt = detail::band_limited(b);
  RealBuffer v(grid.real_size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = at[i] * bt[i];
  return detail::truncated_result(std::move(v), grid);
}

/// Advective derivative (v . grad) f with dealiased products.
template <int Dim>
ScalarField<Dim> advect(const VectorField<Dim>& v, const ScalarField<Dim>& f) {
  require_same_grid(v.grid(), f.grid());
  const Grid<Dim>& grid = f.grid();
  const auto vt = detail::band_limited<Dim, Dim>(v.c);
  const auto ft = detail::band_limited(f);
  RealBuffer acc(grid.real_size(), 0.0);
  for (int j = 0; j < Dim; ++j) {
    const auto dj = from_spectral(spectral::derivative(ft.spectrum(), j));
    for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += vt[j][p] * dj[p];
  }
  return detail::truncated_result(std::move(acc), grid);
}

template <int Dim, int K>
FieldComponents<Dim, K> advect(const VectorField<Dim>& v, const FieldComponents<Dim, K>& f) {
  FieldComponents<Dim, K> out;
  for (int i = 0; i < K; ++i) out.c[i] = advect(v, f.c[i]);
  return out;
}

template <int Dim>
VectorField<Dim> advect(const VectorField<Dim>& v, const VectorField<Dim>& f) {
  return advect<Dim, Dim>(v, static_cast<const FieldComponents<Dim, Dim>&>(f));
}

template <int Dim>
SymTensorField<Dim> advect(const VectorField<Dim>& v, const SymTensorField<Dim>& f) {
  return advect<Dim, kSymComponents<Dim>>(v, static_cast<const FieldComponents<Dim, kSymComponents<Dim>>&>(f));
}

}  // namespace oldroyd
