#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "oldroyd/calculus.hpp"
#include "oldroyd/errors.hpp"
#include "oldroyd/field.hpp"

namespace oldroyd {

/// H^m norm via Plancherel with multiplier (1 + |k|^2)^m; m = 0 is the L2 norm.
template <int Dim>
double sobolev_norm(const ScalarField<Dim>& f, int m) {
  if (m < 0 || m > 3) throw InvalidArgument("Sobolev order must be in {0, 1, 2, 3}");
  return std::sqrt(spectral::sobolev_norm_squared(f.spectrum(), m));
}

template <int Dim>
double sobolev_norm(const VectorField<Dim>& f, int m) {
  if (m < 0 || m > 3) throw InvalidArgument("Sobolev order must be in {0, 1, 2, 3}");
  return std::sqrt(spectral::norm_squared<Dim, Dim>(spectra(f), m));
}

template <int Dim>
double sobolev_norm(const TensorField<Dim>& f, int m) {
  if (m < 0 || m > 3) throw InvalidArgument("Sobolev order must be in {0, 1, 2, 3}");
  double acc = 0.0;
  for (const auto& c : f.c) acc += spectral::sobolev_norm_squared(c.spectrum(), m);
  return std::sqrt(acc);
}

/// Frobenius-based H^m norm; off-diagonal entries are counted twice.
template <int Dim>
double sobolev_norm(const SymTensorField<Dim>& f, int m) {
  if (m < 0 || m > 3) throw InvalidArgument("Sobolev order must be in {0, 1, 2, 3}");
  return std::sqrt(spectral::sym_norm_squared<Dim>(spectra(f), m));
}

template <class FieldT>
double l2_norm(const FieldT& f) {
  return sobolev_norm(f, 0);
}

namespace detail {

// Pointwise magnitude: |f| for scalars, Euclidean for vectors, Frobenius for tensors.
template <int Dim>
double magnitude_at(const ScalarField<Dim>& f, std::size_t p) {
  return std::abs(f[p]);
}
template <int Dim>
double magnitude_at(const VectorField<Dim>& f, std::size_t p) {
  double s = 0.0;
  for (const auto& c : f.c) s += c[p] * c[p];
  return std::sqrt(s);
}
template <int Dim>
double magnitude_at(const TensorField<Dim>& f, std::size_t p) {
  double s = 0.0;
  for (const auto& c : f.c) s += c[p] * c[p];
  return std::sqrt(s);
}
template <int Dim>
double magnitude_at(const SymTensorField<Dim>& f, std::size_t p) {
  double s = 0.0;
  for (int k = 0; k < kSymComponents<Dim>; ++k) s += SymTensorField<Dim>::multiplicity(k) * f.c[k][p] * f.c[k][p];
  return std::sqrt(s);
}

template <int Dim>
const Grid<Dim>& grid_of(const ScalarField<Dim>& f) {
  return f.grid();
}
template <int Dim, int K>
const Grid<Dim>& grid_of(const FieldComponents<Dim, K>& f) {
  return f.grid();
}

}  // namespace detail

/// Largest pointwise magnitude over the grid samples (a lower bound for the continuous sup).
template <class FieldT>
double linf_norm(const FieldT& f) {
  const auto& grid = detail::grid_of(f);
  double m = 0.0;
  for (std::size_t p = 0; p < grid.real_size(); ++p) m = std::max(m, detail::magnitude_at(f, p));
  return m;
}

/// L^p norm by trapezoidal quadrature on the uniform grid.
template <class FieldT>
double lp_norm(const FieldT& f, double p) {
  if (!(p >= 1.0)) throw InvalidArgument("L^p exponent must be >= 1");
  const auto& grid = detail::grid_of(f);
  double acc = 0.0;
  for (std::size_t i = 0; i < grid.real_size(); ++i) acc += std::pow(detail::magnitude_at(f, i), p);
  return std::pow(acc * grid.cell_volume(), 1.0 / p);
}

/// L2 inner product of two vector fields.
template <int Dim>
double inner_product(const VectorField<Dim>& a, const VectorField<Dim>& b) {
  double acc = 0.0;
  for (int i = 0; i < Dim; ++i) acc += inner_product(a[i].spectrum(), b[i].spectrum());
  return acc;
}

}  // namespace oldroyd
