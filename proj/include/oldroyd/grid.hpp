#pragma once

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <sstream>
#include <string>

#include "oldroyd/detail/aligned.hpp"
#include "oldroyd/errors.hpp"

namespace oldroyd {

/// Discretization of the periodic box [0, L_0) x ... x [0, L_{Dim-1}).
///
/// Samples are stored row-major (last axis fastest). Per axis the resolved
/// integer wavenumbers are {-n/2+1, ..., n/2}; physical wavenumbers are those
/// integers times 2*pi/L.
template <int Dim>
struct GridSpec {
  static_assert(Dim == 2 || Dim == 3, "only 2D and 3D tori are supported");

  std::array<int, Dim> n{};
  std::array<double, Dim> box_length{};
  bool dealias = true;

  static GridSpec cube(int points, double length = 2.0 * std::numbers::pi, bool dealias = true) {
    GridSpec s;
    s.n.fill(points);
    s.box_length.fill(length);
    s.dealias = dealias;
    return s;
  }

  void validate() const {
    for (int d = 0; d < Dim; ++d) {
      const int m = n[d];
      if (m < 8 || (m & (m - 1)) != 0) {
        std::ostringstream os;
        os << "grid resolution along axis " << d << " must be a power of two >= 8, got " << m;
        throw InvalidArgument(os.str());
      }
      if (!(box_length[d] > 0.0) || !std::isfinite(box_length[d])) {
        throw InvalidArgument("box length must be positive and finite");
      }
    }
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

namespace detail {

// The FFTW planner is not thread safe; plan creation and destruction go through this lock.
// Intentionally leaked so plans released during static destruction still find it.
inline std::mutex& fftw_planner_mutex() {
  static auto* m = new std::mutex;
  return *m;
}

struct FftPlans {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
  int alignment = 0;

  FftPlans() = default;
  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;
  ~FftPlans() {
    std::lock_guard lock(fftw_planner_mutex());
    if (r2c) fftw_destroy_plan(r2c);
    if (c2r) fftw_destroy_plan(c2r);
  }
};

template <int Dim>
std::shared_ptr<const FftPlans> plans_for(const std::array<int, Dim>& n) {
  static auto* cache = new std::map<std::array<int, Dim>, std::weak_ptr<const FftPlans>>;
  std::lock_guard lock(fftw_planner_mutex());
  if (auto it = cache->find(n); it != cache->end()) {
    if (auto existing = it->second.lock()) return existing;
  }
  std::size_t real_size = 1;
  for (int d = 0; d < Dim; ++d) real_size *= static_cast<std::size_t>(n[d]);
  const std::size_t spectral_size = real_size / static_cast<std::size_t>(n[Dim - 1]) *
                                    static_cast<std::size_t>(n[Dim - 1] / 2 + 1);
  double* in = fftw_alloc_real(real_size);
  fftw_complex* out = fftw_alloc_complex(spectral_size);
  auto plans = std::make_shared<FftPlans>();
  // FFTW_ESTIMATE keeps the algorithm choice independent of timing noise, so
  // repeated runs produce bit-identical output.
  plans->r2c = fftw_plan_dft_r2c(Dim, n.data(), in, out, FFTW_ESTIMATE);
  plans->c2r = fftw_plan_dft_c2r(Dim, n.data(), out, in, FFTW_ESTIMATE);
  plans->alignment = fftw_alignment_of(in);
  fftw_free(in);
  fftw_free(out);
  if (!plans->r2c || !plans->c2r) throw Error("FFTW failed to create a plan");
  (*cache)[n] = plans;
  return plans;
}

template <int Dim>
struct GridData {
  GridSpec<Dim> spec;
  std::size_t real_size = 0;
  std::size_t spectral_size = 0;
  std::array<int, Dim> spectral_shape{};
  double volume = 1.0;
  double cell_volume = 1.0;
  double min_spacing = 0.0;

  // Per spectral index (r2c half-space layout).
  std::array<RealBuffer, Dim> k_eff;  // first-derivative wavenumber, Nyquist zeroed
  RealBuffer k2;                      // |k|^2 with the Nyquist wavenumber kept
  RealBuffer k2_eff;                  // |k_eff|^2
  RealBuffer weight;                  // Plancherel multiplicity of the half-space mode (1 or 2)
  std::vector<std::uint8_t> keep;     // 2/3-rule retention mask (all ones if dealias is off)

  std::shared_ptr<const FftPlans> plans;
};

}  // namespace detail

/// Shared, immutable handle to the spectral tables and FFT plans of one torus grid.
template <int Dim>
class Grid {
 public:
  Grid() = default;

  explicit Grid(const GridSpec<Dim>& spec) {
    spec.validate();
    auto d = std::make_shared<detail::GridData<Dim>>();
    d->spec = spec;
    d->real_size = 1;
    d->volume = 1.0;
    d->min_spacing = std::numeric_limits<double>::infinity();
    for (int a = 0; a < Dim; ++a) {
      d->real_size *= static_cast<std::size_t>(spec.n[a]);
      d->volume *= spec.box_length[a];
      d->spectral_shape[a] = spec.n[a];
      d->min_spacing = std::min(d->min_spacing, spec.box_length[a] / spec.n[a]);
    }
    d->spectral_shape[Dim - 1] = spec.n[Dim - 1] / 2 + 1;
    d->spectral_size = 1;
    for (int a = 0; a < Dim; ++a) d->spectral_size *= static_cast<std::size_t>(d->spectral_shape[a]);
    d->cell_volume = d->volume / static_cast<double>(d->real_size);

    const std::size_t m = d->spectral_size;
    for (int a = 0; a < Dim; ++a) d->k_eff[a].assign(m, 0.0);
    d->k2.assign(m, 0.0);
    d->k2_eff.assign(m, 0.0);
    d->weight.assign(m, 0.0);
    d->keep.assign(m, 1);

    std::array<int, Dim> idx{};
    for (std::size_t s = 0; s < m; ++s) {
      double k2 = 0.0;
      double k2e = 0.0;
      bool keep = true;
      for (int a = 0; a < Dim; ++a) {
        const int na = spec.n[a];
        const int ia = idx[a];
        const int kint = (a == Dim - 1 || ia <= na / 2) ? ia : ia - na;
        const double scale = 2.0 * std::numbers::pi / spec.box_length[a];
        const double k = scale * kint;
        const double ke = (ia == na / 2) ? 0.0 : k;
        d->k_eff[a][s] = ke;
        k2 += k * k;
        k2e += ke * ke;
        if (3 * std::abs(kint) >= na) keep = false;
      }
      d->k2[s] = k2;
      d->k2_eff[s] = k2e;
      const int last = idx[Dim - 1];
      d->weight[s] = (last == 0 || last == spec.n[Dim - 1] / 2) ? 1.0 : 2.0;
      d->keep[s] = (spec.dealias && !keep) ? 0 : 1;
      // advance multi-index, last axis fastest
      for (int a = Dim - 1; a >= 0; --a) {
        if (++idx[a] < d->spectral_shape[a]) break;
        idx[a] = 0;
      }
    }
    d->plans = detail::plans_for<Dim>(spec.n);
    data_ = std::move(d);
  }

  bool valid() const noexcept { return static_cast<bool>(data_); }
  const GridSpec<Dim>& spec() const { return data_->spec; }
  std::size_t real_size() const { return data_->real_size; }
  std::size_t spectral_size() const { return data_->spectral_size; }
  const std::array<int, Dim>& spectral_shape() const { return data_->spectral_shape; }
  double volume() const { return data_->volume; }
  double cell_volume() const { return data_->cell_volume; }
  double min_spacing() const { return data_->min_spacing; }
  bool dealias() const { return data_->spec.dealias; }

  std::span<const double> k_eff(int axis) const { return data_->k_eff[axis]; }
  std::span<const double> k2() const { return data_->k2; }
  std::span<const double> k2_eff() const { return data_->k2_eff; }
  std::span<const double> weight() const { return data_->weight; }
  std::span<const std::uint8_t> keep() const { return data_->keep; }

  /// Physical coordinate of the sample with flat (row-major) index `flat`.
  std::array<double, Dim> coordinate(std::size_t flat) const {
    std::array<double, Dim> x{};
    for (int a = Dim - 1; a >= 0; --a) {
      const auto na = static_cast<std::size_t>(data_->spec.n[a]);
      x[a] = data_->spec.box_length[a] * static_cast<double>(flat % na) / static_cast<double>(na);
      flat /= na;
    }
    return x;
  }

  /// Forward transform normalized so the k = 0 coefficient is the grid mean.
  void forward(std::span<const double> in, std::span<Complex> out) const {
    check_sizes(in.size(), out.size());
    const auto& p = *data_->plans;
    const double scale = 1.0 / static_cast<double>(data_->real_size);
    double* src = const_cast<double*>(in.data());  // r2c out-of-place preserves its input
    RealBuffer* rs = nullptr;
    if (fftw_alignment_of(src) != p.alignment) {
      rs = &real_scratch();
      rs->assign(in.begin(), in.end());
      src = rs->data();
    }
    fftw_complex* dst = reinterpret_cast<fftw_complex*>(out.data());
    ComplexBuffer* cs = nullptr;
    if (fftw_alignment_of(reinterpret_cast<double*>(dst)) != p.alignment) {
      cs = &complex_scratch();
      cs->resize(out.size());
      dst = reinterpret_cast<fftw_complex*>(cs->data());
    }
    fftw_execute_dft_r2c(p.r2c, src, dst);
    if (cs) std::copy(cs->begin(), cs->end(), out.begin());
    for (auto& c : out) c *= scale;
  }

  /// Inverse of forward(): evaluates the Fourier series at the grid points.
  void backward(std::span<const Complex> in, std::span<double> out) const {
    check_sizes(out.size(), in.size());
    const auto& p = *data_->plans;
    auto& cs = complex_scratch();  // c2r destroys its input
    cs.assign(in.begin(), in.end());
    double* dst = out.data();
    RealBuffer* rs = nullptr;
    if (fftw_alignment_of(dst) != p.alignment) {
      rs = &real_scratch();
      rs->resize(out.size());
      dst = rs->data();
    }
    fftw_execute_dft_c2r(p.c2r, reinterpret_cast<fftw_complex*>(cs.data()), dst);
    if (rs) std::copy(rs->begin(), rs->end(), out.begin());
  }

  /// backward() that may overwrite `in`, saving the defensive copy when `in` is aligned.
  void backward_consuming(std::span<Complex> in, std::span<double> out) const {
    check_sizes(out.size(), in.size());
    const auto& p = *data_->plans;
    const bool in_ok = fftw_alignment_of(reinterpret_cast<double*>(in.data())) == p.alignment;
    const bool out_ok = fftw_alignment_of(out.data()) == p.alignment;
    if (!in_ok || !out_ok) {
      backward(in, out);
      return;
    }
    fftw_execute_dft_c2r(p.c2r, reinterpret_cast<fftw_complex*>(in.data()), out.data());
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    if (a.data_ == b.data_) return true;
    if (!a.data_ || !b.data_) return false;
    return a.data_->spec == b.data_->spec;
  }

 private:
  void check_sizes(std::size_t real, std::size_t spectral) const {
    if (real != data_->real_size || spectral != data_->spectral_size) {
      throw InvalidArgument("buffer size does not match grid");
    }
  }
  static RealBuffer& real_scratch() {
    thread_local RealBuffer b;
    return b;
  }
  static ComplexBuffer& complex_scratch() {
    thread_local ComplexBuffer b;
    return b;
  }

  std::shared_ptr<const detail::GridData<Dim>> data_;
};

/// Throws InvalidArgument unless both grids describe the same discretization.
template <int Dim>
void require_same_grid(const Grid<Dim>& a, const Grid<Dim>& b) {
  if (!(a == b)) throw InvalidArgument("fields live on different grids");
}

}  // namespace oldroyd
