#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

#include "oldroyd/calculus.hpp"
#include "oldroyd/detail/kernels.hpp"
#include "oldroyd/errors.hpp"
#include "oldroyd/field.hpp"
#include "oldroyd/leray.hpp"
#include "oldroyd/transport.hpp"

namespace oldroyd {

/// Velocity/stress pair, used both for states and for the frozen fields (v, theta) of an iterate.
template <int Dim>
struct FlowPair {
  VectorField<Dim> u;
  SymTensorField<Dim> tau;
};

/// Solution at one time level.
template <int Dim>
struct FlowState {
  double t = 0.0;
  VectorField<Dim> u;
  SymTensorField<Dim> tau;

  static FlowState zeros(const Grid<Dim>& grid, double t = 0.0) {
    return {t, VectorField<Dim>::zeros(grid), SymTensorField<Dim>::zeros(grid)};
  }
  const Grid<Dim>& grid() const { return u.grid(); }
  FlowPair<Dim> pair() const { return {u, tau}; }
};

struct PicardReport {
  int iterations = 0;
  std::vector<double> contraction_ratios;  // d_{m+1}/d_m between successive iterate distances
  std::vector<double> distances;           // Y-distance between successive iterates
  bool converged = false;
  double final_residual = std::numeric_limits<double>::quiet_NaN();

  double max_ratio() const {
    double m = 0.0;
    for (double r : contraction_ratios) m = std::max(m, r);
    return m;
  }
  /// Ratios non-increasing after the first one (observed on small data; diagnostic only).
  bool monotone() const {
    for (std::size_t i = 2; i < contraction_ratios.size(); ++i) {
      if (contraction_ratios[i] > contraction_ratios[i - 1]) return false;
    }
    return true;
  }
};

struct PicardOptions {
  double tol = 1e-10;
  int max_iter = 25;
  TransportOptions transport;
};

namespace detail {

template <int Dim>
struct SpectralPair {
  static constexpr int K = kSymComponents<Dim>;
  SpectralArray<Dim, Dim> u;
  SpectralArray<Dim, K> tau;

  static SpectralPair of(const VectorField<Dim>& u, const SymTensorField<Dim>& tau) {
    require_same_grid(u.grid(), tau.grid());
    return {spectra(u), spectra(tau)};
  }
  FlowPair<Dim> fields() const {
    return {field_from_spectra<VectorField<Dim>, Dim, Dim>(u), field_from_spectra<SymTensorField<Dim>, Dim, K>(tau)};
  }
};

template <int Dim>
double y_distance(const SpectralPair<Dim>& a, const SpectralPair<Dim>& b, double dt) {
  SpectralArray<Dim, Dim> du;
  SpectralArray<Dim, kSymComponents<Dim>> dtau;
  for (int i = 0; i < Dim; ++i) du[i] = a.u[i] - b.u[i];
  for (int k = 0; k < kSymComponents<Dim>; ++k) dtau[k] = a.tau[k] - b.tau[k];
  return std::sqrt(spectral::norm_squared<Dim, Dim>(du)) + std::sqrt(spectral::sym_norm_squared<Dim>(dtau)) +
         std::sqrt(dt) * std::sqrt(spectral::gradient_norm_squared<Dim>(du));
}

/// The linearized one-step map (v, theta) -> (u, tau) with everything that depends only on the
/// start-of-step state computed once.
///
/// Velocity: exponential Stokes step with the forcing averaged between the start state and the
/// frozen pair, f = P[div theta - Re (v.grad)v]. Stress: integrating-factor Heun step along a
/// velocity moving from the start velocity to v.
template <int Dim>
class CoupledMap {
 public:
  static constexpr int K = kSymComponents<Dim>;

  CoupledMap(const SpectralPair<Dim>& start, double dt, const PhysicalParams& params, const TransportOptions& opts)
      : start_(start),
        params_(params),
        propagator_(start.u[0].grid(), dt, params),
        view0_(make_velocity_view<Dim>(start.u)),
        stage_(start.tau, view0_, dt, params, opts) {
    f0_ = momentum_source<Dim>(view0_, start.tau, params.re);
  }

  SpectralPair<Dim> apply(const SpectralPair<Dim>& guess) const {
    const auto view1 = make_velocity_view<Dim>(guess.u);
    auto f = momentum_source<Dim>(view1, guess.tau, params_.re);
    for (int i = 0; i < Dim; ++i) {
      f[i] += f0_[i];
      f[i] *= 0.5;
    }
    SpectralPair<Dim> out{propagator_.apply(start_.u, f), stage_.finish(view1)};
    // Zero-mean velocity: the mean mode only sees roundoff from the dealiased products.
    for (int i = 0; i < Dim; ++i) out.u[i][0] = 0.0;
    return out;
  }

 private:
  SpectralPair<Dim> start_;
  PhysicalParams params_;
  spectral::StokesPropagator<Dim> propagator_;
  VelocityView<Dim> view0_;
  TransportStage<Dim> stage_;
  SpectralArray<Dim, Dim> f0_;
};

}  // namespace detail

/// One application of the linearized map to the frozen pair `guess`, starting from `state`.
template <int Dim>
FlowPair<Dim> phi_step(const FlowState<Dim>& state, const FlowPair<Dim>& guess, double dt,
                       const PhysicalParams& params, const TransportOptions& opts = {}) {
  require_same_grid(state.grid(), guess.u.grid());
  const auto start = detail::SpectralPair<Dim>::of(state.u, state.tau);
  const detail::CoupledMap<Dim> map(start, dt, params, opts);
  return map.apply(detail::SpectralPair<Dim>::of(guess.u, guess.tau)).fields();
}

/// ||u_a - u_b|| + ||tau_a - tau_b|| + sqrt(dt) ||grad(u_a - u_b)||, all L2.
template <int Dim>
double y_distance(const FlowPair<Dim>& a, const FlowPair<Dim>& b, double dt) {
  if (!(dt >= 0.0)) throw InvalidArgument("time step must be nonnegative");
  return detail::y_distance(detail::SpectralPair<Dim>::of(a.u, a.tau), detail::SpectralPair<Dim>::of(b.u, b.tau), dt);
}

/// Advances one step by fixed-point iteration of the linearized map, starting from the
/// current state. Throws NonContraction if successive distances fail to shrink on three
/// consecutive iterates and MaxIterExceeded if the tolerance is not reached in time.
template <int Dim>
std::pair<FlowState<Dim>, PicardReport> step_coupled(const FlowState<Dim>& state, double dt,
                                                     const PhysicalParams& params, const PicardOptions& opts = {}) {
  if (!(opts.tol > 0.0)) throw InvalidArgument("Picard tolerance must be positive");
  if (opts.max_iter < 2) throw InvalidArgument("Picard max_iter must be at least 2");
  const auto start = detail::SpectralPair<Dim>::of(state.u, state.tau);
  const detail::CoupledMap<Dim> map(start, dt, params, opts.transport);

  PicardReport report;
  detail::SpectralPair<Dim> x = start;
  double previous = 0.0;
  int growing = 0;
  for (int m = 1; m <= opts.max_iter; ++m) {
    auto y = map.apply(x);
    const double d = detail::y_distance(y, x, dt);
    if (!std::isfinite(d)) throw NonFiniteValue("Picard iterate became non-finite");
    report.iterations = m;
    report.distances.push_back(d);
    report.final_residual = d;
    x = std::move(y);
    if (m > 1) {
      const double r = d / previous;
      report.contraction_ratios.push_back(r);
      growing = r >= 1.0 ? growing + 1 : 0;
    }
    if (d <= opts.tol) {
      report.converged = true;
      auto fields = x.fields();
      return {FlowState<Dim>{state.t + dt, std::move(fields.u), std::move(fields.tau)}, std::move(report)};
    }
    if (growing >= 3) {
      std::ostringstream os;
      os << "fixed-point iteration stopped contracting at t = " << state.t << " (dt = " << dt << ", ratio "
         << report.contraction_ratios.back() << ")";
      throw NonContraction(os.str(), report.contraction_ratios);
    }
    previous = d;
  }
  std::ostringstream os;
  os << "fixed-point iteration did not reach tol " << opts.tol << " in " << opts.max_iter
     << " iterations at t = " << state.t << " (residual " << report.final_residual << ")";
  throw MaxIterExceeded(os.str(), report.final_residual);
}

template <int Dim>
std::pair<FlowState<Dim>, PicardReport> step_coupled(const FlowState<Dim>& state, double dt, double tol, int max_iter,
                                                     const PhysicalParams& params) {
  PicardOptions opts;
  opts.tol = tol;
  opts.max_iter = max_iter;
  return step_coupled(state, dt, params, opts);
}

}  // namespace oldroyd
