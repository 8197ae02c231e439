#pragma once

// Helpers shared by the unit tests: analytic trigonometric fields (used as independent
// oracles for derivatives and products), random band-limited fields and comparison utilities.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "oldroyd/oldroyd.hpp"

namespace support {

using namespace oldroyd;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

template <int Dim>
Grid<Dim> grid(int n, bool dealias = true) {
  return Grid<Dim>(GridSpec<Dim>::cube(n, kTwoPi, dealias));
}

/// Sum of a cos(k.x + phase) over integer wavevectors on the 2 pi box, with exact derivatives.
template <int Dim>
struct TrigSum {
  struct Mode {
    std::array<int, Dim> k{};
    double amp = 0.0;
    double phase = 0.0;
  };
  std::vector<Mode> modes;

  static double dot(const Mode& m, const std::array<double, Dim>& x) {
    double s = 0.0;
    for (int d = 0; d < Dim; ++d) s += m.k[d] * x[d];
    return s + m.phase;
  }
  double value(const std::array<double, Dim>& x) const {
    double s = 0.0;
    for (const auto& m : modes) s += m.amp * std::cos(dot(m, x));
    return s;
  }
  double derivative(const std::array<double, Dim>& x, int axis) const {
    double s = 0.0;
    for (const auto& m : modes) s -= m.amp * m.k[axis] * std::sin(dot(m, x));
    return s;
  }
  double second(const std::array<double, Dim>& x, int a, int b) const {
    double s = 0.0;
    for (const auto& m : modes) s -= m.amp * m.k[a] * m.k[b] * std::cos(dot(m, x));
    return s;
  }
  ScalarField<Dim> sample(const Grid<Dim>& g) const {
    return ScalarField<Dim>::sample(g, [&](const auto& x) { return value(x); });
  }
  ScalarField<Dim> sample_derivative(const Grid<Dim>& g, int axis) const {
    return ScalarField<Dim>::sample(g, [&](const auto& x) { return derivative(x, axis); });
  }
};

/// Random trigonometric sum with |k_d| <= kmax on every axis; k = 0 excluded unless `with_mean`.
template <int Dim>
TrigSum<Dim> random_trig(std::mt19937_64& rng, int kmax, int count = 6, bool with_mean = false) {
  std::uniform_int_distribution<int> kd(-kmax, kmax);
  std::uniform_real_distribution<double> amp(-1.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  TrigSum<Dim> t;
  while (static_cast<int>(t.modes.size()) < count) {
    typename TrigSum<Dim>::Mode m;
    bool zero = true;
    for (int d = 0; d < Dim; ++d) {
      m.k[d] = kd(rng);
      zero = zero && m.k[d] == 0;
    }
    if (zero && !with_mean) continue;
    m.amp = amp(rng);
    m.phase = zero ? 0.0 : phase(rng);
    t.modes.push_back(m);
  }
  return t;
}

template <int Dim>
ScalarField<Dim> random_scalar(const Grid<Dim>& g, std::mt19937_64& rng, int kmax = 4, bool with_mean = false) {
  return random_trig<Dim>(rng, kmax, 6, with_mean).sample(g);
}

template <int Dim>
VectorField<Dim> random_vector(const Grid<Dim>& g, std::mt19937_64& rng, int kmax = 4, bool with_mean = false) {
  VectorField<Dim> u;
  for (int i = 0; i < Dim; ++i) u[i] = random_scalar(g, rng, kmax, with_mean);
  return u;
}

template <int Dim>
SymTensorField<Dim> random_sym(const Grid<Dim>& g, std::mt19937_64& rng, int kmax = 4, bool with_mean = true) {
  SymTensorField<Dim> t;
  for (auto& c : t.c) c = random_scalar(g, rng, kmax, with_mean);
  return t;
}

/// Divergence-free random field built as a curl (3D) or a stream-function rotation (2D).
template <int Dim>
VectorField<Dim> random_solenoidal(const Grid<Dim>& g, std::mt19937_64& rng, int kmax = 4) {
  if constexpr (Dim == 2) {
    const auto psi = random_trig<2>(rng, kmax);
    VectorField<2> u;
    u[0] = psi.sample_derivative(g, 1);
    u[1] = -1.0 * psi.sample_derivative(g, 0);
    return u;
  } else {
    std::array<TrigSum<3>, 3> a{random_trig<3>(rng, kmax), random_trig<3>(rng, kmax), random_trig<3>(rng, kmax)};
    VectorField<3> u;
    u[0] = ScalarField<3>::sample(g, [&](const auto& x) { return a[2].derivative(x, 1) - a[1].derivative(x, 2); });
    u[1] = ScalarField<3>::sample(g, [&](const auto& x) { return a[0].derivative(x, 2) - a[2].derivative(x, 0); });
    u[2] = ScalarField<3>::sample(g, [&](const auto& x) { return a[1].derivative(x, 0) - a[0].derivative(x, 1); });
    return u;
  }
}

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

template <int Dim>
double max_abs(const ScalarField<Dim>& f) {
  return max_abs(f.values());
}

template <int Dim, int K>
double max_abs(const FieldComponents<Dim, K>& f) {
  double m = 0.0;
  for (const auto& c : f.c) m = std::max(m, max_abs(c));
  return m;
}

template <int Dim>
double max_diff(const ScalarField<Dim>& a, const ScalarField<Dim>& b) {
  double m = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) m = std::max(m, std::abs(a[p] - b[p]));
  return m;
}

template <int Dim, int K>
double max_diff(const FieldComponents<Dim, K>& a, const FieldComponents<Dim, K>& b) {
  double m = 0.0;
  for (int i = 0; i < K; ++i) m = std::max(m, max_diff(a.c[i], b.c[i]));
  return m;
}

/// Trapezoidal quadrature of f*g over the box, independent of the spectral machinery.
template <int Dim>
double quadrature(const ScalarField<Dim>& f, const ScalarField<Dim>& g) {
  double s = 0.0;
  for (std::size_t p = 0; p < f.size(); ++p) s += f[p] * g[p];
  return s * f.grid().cell_volume();
}

/// Coefficient of exp(i k.x) for an integer wavevector, completing the half spectrum by symmetry.
template <int Dim>
std::complex<double> coefficient_at(const SpectralCoeffs<Dim>& c, std::array<int, Dim> k) {
  const auto& n = c.grid().spec().n;
  bool conj = false;
  if (k[Dim - 1] < 0) {
    for (auto& x : k) x = -x;
    conj = true;
  }
  std::size_t flat = 0;
  for (int d = 0; d < Dim; ++d) {
    const int extent = d == Dim - 1 ? n[d] / 2 + 1 : n[d];
    const int idx = d == Dim - 1 ? k[d] : ((k[d] % n[d]) + n[d]) % n[d];
    flat = flat * static_cast<std::size_t>(extent) + static_cast<std::size_t>(idx);
  }
  const auto v = c[flat];
  return conj ? std::conj(v) : v;
}

/// Central second-order difference along `axis` on the sample grid.
template <int Dim>
ScalarField<Dim> central_difference(const ScalarField<Dim>& f, int axis) {
  const auto& g = f.grid();
  const auto& n = g.spec().n;
  const double h = g.spec().box_length[axis] / n[axis];
  std::size_t stride = 1;
  for (int d = Dim - 1; d > axis; --d) stride *= static_cast<std::size_t>(n[d]);
  RealBuffer out(f.size());
  for (std::size_t p = 0; p < f.size(); ++p) {
    const auto i = static_cast<int>((p / stride) % static_cast<std::size_t>(n[axis]));
    const std::size_t base = p - static_cast<std::size_t>(i) * stride;
    const auto at = [&](int j) { return f[base + static_cast<std::size_t>((j + n[axis]) % n[axis]) * stride]; };
    out[p] = (at(i + 1) - at(i - 1)) / (2.0 * h);
  }
  return ScalarField<Dim>(g, std::move(out));
}

/// Dense matrix helpers for pointwise tensor oracles.
template <int Dim>
using Mat = std::array<std::array<double, Dim>, Dim>;

template <int Dim>
Mat<Dim> matmul(const Mat<Dim>& a, const Mat<Dim>& b) {
  Mat<Dim> r{};
  for (int i = 0; i < Dim; ++i)
    for (int j = 0; j < Dim; ++j)
      for (int k = 0; k < Dim; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

}  // namespace support
