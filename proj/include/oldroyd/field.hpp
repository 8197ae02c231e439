#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <utility>

#include "oldroyd/detail/aligned.hpp"
#include "oldroyd/errors.hpp"
#include "oldroyd/grid.hpp"

namespace oldroyd {

/// Fourier coefficients of a real field in the r2c half-space layout.
///
/// Normalized so that coefficient 0 is the grid mean; the field is recovered as
/// f(x) = sum_k c_k exp(i k.x) over the full (Hermitian-completed) spectrum.
template <int Dim>
class SpectralCoeffs {
 public:
  SpectralCoeffs() = default;
  explicit SpectralCoeffs(const Grid<Dim>& grid) : grid_(grid), data_(grid.spectral_size()) {}
  SpectralCoeffs(const Grid<Dim>& grid, ComplexBuffer data) : grid_(grid), data_(std::move(data)) {
    if (data_.size() != grid_.spectral_size()) throw InvalidArgument("coefficient count does not match grid");
  }

  const Grid<Dim>& grid() const { return grid_; }
  std::size_t size() const { return data_.size(); }
  std::span<const Complex> data() const { return data_; }
  std::span<Complex> data() { return data_; }
  const Complex& operator[](std::size_t s) const { return data_[s]; }
  Complex& operator[](std::size_t s) { return data_[s]; }

  SpectralCoeffs& operator+=(const SpectralCoeffs& o) {
    require_same_grid(grid_, o.grid_);
    for (std::size_t s = 0; s < data_.size(); ++s) data_[s] += o.data_[s];
    return *this;
  }
  SpectralCoeffs& operator-=(const SpectralCoeffs& o) {
    require_same_grid(grid_, o.grid_);
    for (std::size_t s = 0; s < data_.size(); ++s) data_[s] -= o.data_[s];
    return *this;
  }
  SpectralCoeffs& operator*=(double a) {
    for (auto& c : data_) c *= a;
    return *this;
  }
  /// this += a * o
  SpectralCoeffs& axpy(double a, const SpectralCoeffs& o) {
    require_same_grid(grid_, o.grid_);
    for (std::size_t s = 0; s < data_.size(); ++s) data_[s] += a * o.data_[s];
    return *this;
  }

  friend SpectralCoeffs operator+(SpectralCoeffs a, const SpectralCoeffs& b) { return a += b; }
  friend SpectralCoeffs operator-(SpectralCoeffs a, const SpectralCoeffs& b) { return a -= b; }
  friend SpectralCoeffs operator*(double s, SpectralCoeffs a) { return a *= s; }

  /// Zeroes every coefficient outside the 2/3-rule box (no-op when dealiasing is off).
  SpectralCoeffs& truncate() {
    if (!grid_.dealias()) return *this;
    const auto keep = grid_.keep();
    for (std::size_t s = 0; s < data_.size(); ++s) {
      if (!keep[s]) data_[s] = 0.0;
    }
    return *this;
  }

  /// True if no coefficient outside the 2/3-rule box is nonzero.
  bool band_limited() const {
    if (!grid_.dealias()) return true;
    const auto keep = grid_.keep();
    for (std::size_t s = 0; s < data_.size(); ++s) {
      if (!keep[s] && data_[s] != Complex{}) return false;
    }
    return true;
  }

  /// Integral of |f|^2 over the box by Plancherel.
  double norm_squared() const {
    const auto w = grid_.weight();
    double acc = 0.0;
    for (std::size_t s = 0; s < data_.size(); ++s) acc += w[s] * std::norm(data_[s]);
    return acc * grid_.volume();
  }

 private:
  Grid<Dim> grid_;
  ComplexBuffer data_;
};

/// Plancherel inner product, integral of f*g over the box for real f, g.
template <int Dim>
double inner_product(const SpectralCoeffs<Dim>& f, const SpectralCoeffs<Dim>& g) {
  require_same_grid(f.grid(), g.grid());
  const auto w = f.grid().weight();
  double acc = 0.0;
  for (std::size_t s = 0; s < f.size(); ++s) acc += w[s] * std::real(f[s] * std::conj(g[s]));
  return acc * f.grid().volume();
}

namespace detail {

template <int Dim>
struct SpectrumSlot {
  std::mutex mutex;
  std::shared_ptr<const SpectralCoeffs<Dim>> coeffs;
};

}  // namespace detail

template <int Dim>
class ScalarField;

template <int Dim>
ScalarField<Dim> from_spectral(SpectralCoeffs<Dim> coeffs);

/// Real samples of a scalar on the torus grid.
///
/// Values are immutable after construction and shared between copies. The
/// spectral view is computed on first use and cached; the cache is shared by
/// copies as well, so concurrent readers are safe.
template <int Dim>
class ScalarField {
 public:
  ScalarField() = default;

  explicit ScalarField(const Grid<Dim>& grid)
      : grid_(grid),
        values_(std::make_shared<const RealBuffer>(grid.real_size(), 0.0)),
        slot_(std::make_shared<detail::SpectrumSlot<Dim>>()) {}

  ScalarField(const Grid<Dim>& grid, RealBuffer values)
      : grid_(grid), slot_(std::make_shared<detail::SpectrumSlot<Dim>>()) {
    if (values.size() != grid.real_size()) throw InvalidArgument("sample count does not match grid");
    values_ = std::make_shared<const RealBuffer>(std::move(values));
  }

  /// Samples f(x) at every grid point.
  template <class F>
  static ScalarField sample(const Grid<Dim>& grid, F&& f) {
    RealBuffer v(grid.real_size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid.coordinate(i));
    return ScalarField(grid, std::move(v));
  }

  static ScalarField constant(const Grid<Dim>& grid, double c) {
    return ScalarField(grid, RealBuffer(grid.real_size(), c));
  }

  const Grid<Dim>& grid() const { return grid_; }
  std::size_t size() const { return values_->size(); }
  std::span<const double> values() const { return *values_; }
  double operator[](std::size_t i) const { return (*values_)[i]; }

  /// Cached spectral view; throws NonFiniteValue if a sample is NaN or Inf.
  const SpectralCoeffs<Dim>& spectrum() const {
    std::lock_guard lock(slot_->mutex);
    if (!slot_->coeffs) {
      for (double v : *values_) {
        if (!std::isfinite(v)) throw NonFiniteValue("field contains non-finite samples");
      }
      SpectralCoeffs<Dim> c(grid_);
      grid_.forward(*values_, c.data());
      slot_->coeffs = std::make_shared<const SpectralCoeffs<Dim>>(std::move(c));
    }
    return *slot_->coeffs;
  }

 private:
  friend ScalarField from_spectral<Dim>(SpectralCoeffs<Dim> coeffs);

  Grid<Dim> grid_;
  std::shared_ptr<const RealBuffer> values_;
  std::shared_ptr<detail::SpectrumSlot<Dim>> slot_;
};

/// Spectral coefficients of a field (copy of the cached view).
template <int Dim>
SpectralCoeffs<Dim> to_spectral(const ScalarField<Dim>& f) {
  return f.spectrum();
}

/// Evaluates coefficients on the grid. The returned field caches `coeffs` as its spectrum.
template <int Dim>
ScalarField<Dim> from_spectral(SpectralCoeffs<Dim> coeffs) {
  const Grid<Dim>& grid = coeffs.grid();
  RealBuffer v(grid.real_size());
  grid.backward(coeffs.data(), v);
  for (double x : v) {
    if (!std::isfinite(x)) throw NonFiniteValue("spectral coefficients evaluate to non-finite samples");
  }
  ScalarField<Dim> f(grid, std::move(v));
  f.slot_->coeffs = std::make_shared<const SpectralCoeffs<Dim>>(std::move(coeffs));
  return f;
}

template <int Dim>
ScalarField<Dim> pointwise(const ScalarField<Dim>& a, const ScalarField<Dim>& b,
                           const std::function<double(double, double)>& op) {
  require_same_grid(a.grid(), b.grid());
  RealBuffer v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = op(a[i], b[i]);
  return ScalarField<Dim>(a.grid(), std::move(v));
}

template <int Dim>
ScalarField<Dim> operator+(const ScalarField<Dim>& a, const ScalarField<Dim>& b) {
  return pointwise<Dim>(a, b, std::plus<>{});
}
template <int Dim>
ScalarField<Dim> operator-(const ScalarField<Dim>& a, const ScalarField<Dim>& b) {
  return pointwise<Dim>(a, b, std::minus<>{});
}
template <int Dim>
ScalarField<Dim> operator*(double s, const ScalarField<Dim>& a) {
  RealBuffer v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = s * a[i];
  return ScalarField<Dim>(a.grid(), std::move(v));
}

/// Number of independent components of a symmetric Dim x Dim tensor.
template <int Dim>
inline constexpr int kSymComponents = Dim * (Dim + 1) / 2;

/// Fixed-size bundle of scalar components sharing one grid.
template <int Dim, int K>
struct FieldComponents {
  std::array<ScalarField<Dim>, K> c;

  static constexpr int components() { return K; }

  static FieldComponents zeros(const Grid<Dim>& grid) {
    FieldComponents f;
    f.c.fill(ScalarField<Dim>(grid));
    return f;
  }
  const Grid<Dim>& grid() const { return c[0].grid(); }

  friend FieldComponents operator+(const FieldComponents& a, const FieldComponents& b) {
    FieldComponents r;
    for (int i = 0; i < K; ++i) r.c[i] = a.c[i] + b.c[i];
    return r;
  }
  friend FieldComponents operator-(const FieldComponents& a, const FieldComponents& b) {
    FieldComponents r;
    for (int i = 0; i < K; ++i) r.c[i] = a.c[i] - b.c[i];
    return r;
  }
  friend FieldComponents operator*(double s, const FieldComponents& a) {
    FieldComponents r;
    for (int i = 0; i < K; ++i) r.c[i] = s * a.c[i];
    return r;
  }
};

/// Arithmetic that keeps the concrete bundle type (VectorField + VectorField is a VectorField).
template <class Derived, class Base>
struct BundleArithmetic {
  friend Derived operator+(const Derived& a, const Derived& b) {
    return Derived(static_cast<const Base&>(a) + static_cast<const Base&>(b));
  }
  friend Derived operator-(const Derived& a, const Derived& b) {
    return Derived(static_cast<const Base&>(a) - static_cast<const Base&>(b));
  }
  friend Derived operator*(double s, const Derived& a) { return Derived(s * static_cast<const Base&>(a)); }
};

/// Vector field u_i, i < Dim.
template <int Dim>
struct VectorField : FieldComponents<Dim, Dim>, BundleArithmetic<VectorField<Dim>, FieldComponents<Dim, Dim>> {
  using Base = FieldComponents<Dim, Dim>;
  VectorField() = default;
  VectorField(const Base& b) : Base(b) {}
  static VectorField zeros(const Grid<Dim>& g) { return Base::zeros(g); }
  const ScalarField<Dim>& operator[](int i) const { return this->c[i]; }
  ScalarField<Dim>& operator[](int i) { return this->c[i]; }
};

/// General (not necessarily symmetric) tensor field T_ij stored row-major.
///
/// Velocity gradients follow the convention (grad u)_ij = d u_i / d x_j.
template <int Dim>
struct TensorField : FieldComponents<Dim, Dim * Dim>,
                     BundleArithmetic<TensorField<Dim>, FieldComponents<Dim, Dim * Dim>> {
  using Base = FieldComponents<Dim, Dim * Dim>;
  TensorField() = default;
  TensorField(const Base& b) : Base(b) {}
  static TensorField zeros(const Grid<Dim>& g) { return Base::zeros(g); }
  const ScalarField<Dim>& operator()(int i, int j) const { return this->c[i * Dim + j]; }
  ScalarField<Dim>& operator()(int i, int j) { return this->c[i * Dim + j]; }
  TensorField transpose() const {
    TensorField t;
    for (int i = 0; i < Dim; ++i)
      for (int j = 0; j < Dim; ++j) t(i, j) = (*this)(j, i);
    return t;
  }
};

/// Symmetric tensor field; only the upper triangle (i <= j, row-major) is stored,
/// so symmetry holds by construction.
template <int Dim>
struct SymTensorField : FieldComponents<Dim, kSymComponents<Dim>>,
                        BundleArithmetic<SymTensorField<Dim>, FieldComponents<Dim, kSymComponents<Dim>>> {
  using Base = FieldComponents<Dim, kSymComponents<Dim>>;
  SymTensorField() = default;
  SymTensorField(const Base& b) : Base(b) {}
  static SymTensorField zeros(const Grid<Dim>& g) { return Base::zeros(g); }

  static constexpr int index(int i, int j) {
    if (i > j) std::swap(i, j);
    return i * Dim - i * (i - 1) / 2 + (j - i);
  }
  /// Row and column of stored component k.
  static constexpr std::pair<int, int> entry(int k) {
    for (int i = 0; i < Dim; ++i)
      for (int j = i; j < Dim; ++j)
        if (index(i, j) == k) return {i, j};
    return {-1, -1};
  }
  /// Frobenius multiplicity of stored component k (2 for off-diagonal entries).
  static constexpr double multiplicity(int k) { return entry(k).first == entry(k).second ? 1.0 : 2.0; }

  const ScalarField<Dim>& operator()(int i, int j) const { return this->c[index(i, j)]; }
  ScalarField<Dim>& operator()(int i, int j) { return this->c[index(i, j)]; }

  /// phi * Identity
  static SymTensorField isotropic(const ScalarField<Dim>& phi) {
    SymTensorField t = zeros(phi.grid());
    for (int i = 0; i < Dim; ++i) t(i, i) = phi;
    return t;
  }
  TensorField<Dim> full() const {
    TensorField<Dim> t;
    for (int i = 0; i < Dim; ++i)
      for (int j = 0; j < Dim; ++j) t(i, j) = (*this)(i, j);
    return t;
  }
};

template <int Dim, int K>
using SpectralArray = std::array<SpectralCoeffs<Dim>, K>;

template <int Dim, int K>
SpectralArray<Dim, K> spectra(const FieldComponents<Dim, K>& f) {
  SpectralArray<Dim, K> s;
  for (int i = 0; i < K; ++i) s[i] = f.c[i].spectrum();
  return s;
}

template <class FieldT, int Dim, int K>
FieldT field_from_spectra(SpectralArray<Dim, K> s) {
  FieldT f;
  for (int i = 0; i < K; ++i) f.c[i] = from_spectral(std::move(s[i]));
  return f;
}

}  // namespace oldroyd
