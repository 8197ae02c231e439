#pragma once

#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>

#include "oldroyd/detail/kernels.hpp"
#include "oldroyd/errors.hpp"
#include "oldroyd/field.hpp"
#include "oldroyd/leray.hpp"

namespace oldroyd {

enum class CflPolicy { error, warn };

struct TransportOptions {
  double cfl_safety = 0.5;
  CflPolicy cfl_policy = CflPolicy::error;
  // Called with the offending CFL number under CflPolicy::warn; prints to stderr when empty.
  std::function<void(double)> on_cfl_warning;
};

/// Advective CFL number dt * max|v| / h.
template <int Dim>
double cfl_number(double max_speed, double dt, const Grid<Dim>& grid) {
  return dt * max_speed / grid.min_spacing();
}

namespace detail {

template <int Dim>
void check_cfl(const VelocityView<Dim>& v, double dt, const TransportOptions& opts) {
  const double cfl = cfl_number(v.max_speed, dt, v.grid());
  if (cfl <= opts.cfl_safety) return;
  if (opts.cfl_policy == CflPolicy::warn) {
    if (opts.on_cfl_warning) {
      opts.on_cfl_warning(cfl);
    } else {
      std::cerr << "warning: stress transport CFL " << cfl << " exceeds " << opts.cfl_safety << '\n';
    }
    return;
  }
  std::ostringstream os;
  os << "stress transport CFL " << cfl << " exceeds the safety bound " << opts.cfl_safety;
  throw CflViolation(os.str(), cfl);
}

/// Integrating-factor Heun step for the stress, split so the first stage can be reused
/// while only the end-of-step velocity changes (as inside a fixed-point loop).
///
///   tau* = E (tau0 + dt N(tau0, v0))
///   tau1 = E tau0 + dt/2 (E N(tau0, v0) + N(tau*, v1)),   E = exp(-dt/We)
template <int Dim>
class TransportStage {
 public:
  static constexpr int K = kSymComponents<Dim>;

  TransportStage(const SpectralArray<Dim, K>& tau0, const VelocityView<Dim>& v0, double dt,
                 const PhysicalParams& params, TransportOptions opts)
      : params_(params), opts_(std::move(opts)), dt_(dt), decay_(std::exp(-dt / params.we)), tau0_(tau0) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("time step must be positive");
    params.validate(true);
    check_cfl(v0, dt, opts_);
    n0_ = stress_nonlinear(v0, make_stress_view(tau0), params);
    SpectralArray<Dim, K> predictor;
    for (int k = 0; k < K; ++k) {
      predictor[k] = tau0[k];
      predictor[k].axpy(dt, n0_[k]);
      predictor[k] *= decay_;
    }
    predictor_ = make_stress_view(predictor);
  }

  SpectralArray<Dim, K> finish(const VelocityView<Dim>& v1) const {
    check_cfl(v1, dt_, opts_);
    const auto n1 = stress_nonlinear(v1, predictor_, params_);
    SpectralArray<Dim, K> out;
    for (int k = 0; k < K; ++k) {
      out[k] = tau0_[k];
      out[k] *= decay_;
      out[k].axpy(0.5 * dt_ * decay_, n0_[k]);
      out[k].axpy(0.5 * dt_, n1[k]);
    }
    return out;
  }

 private:
  PhysicalParams params_;
  TransportOptions opts_;
  double dt_;
  double decay_;
  SpectralArray<Dim, K> tau0_;
  SpectralArray<Dim, K> n0_;
  StressView<Dim> predictor_;
};

}  // namespace detail

/// Stress tendency d tau/dt = [2 alpha D(v) - tau]/We - (v.grad)tau - g_a(tau, grad v).
template <int Dim>
SymTensorField<Dim> stress_rhs(const SymTensorField<Dim>& tau, const VectorField<Dim>& v,
                               const PhysicalParams& params) {
  require_same_grid(tau.grid(), v.grid());
  params.validate(true);
  constexpr int K = kSymComponents<Dim>;
  const auto ts = spectra(tau);
  auto r = detail::stress_nonlinear(detail::make_velocity_view<Dim>(spectra(v)), detail::make_stress_view<Dim>(ts), params);
  for (int k = 0; k < K; ++k) r[k].axpy(-1.0 / params.we, ts[k]);
  return field_from_spectra<SymTensorField<Dim>, Dim, K>(std::move(r));
}

/// One stress step along a velocity that moves linearly from `v_start` to `v_end` over dt.
template <int Dim>
SymTensorField<Dim> transport_step(const SymTensorField<Dim>& tau0, const VectorField<Dim>& v_start,
                                   const VectorField<Dim>& v_end, double dt, const PhysicalParams& params,
                                   const TransportOptions& opts = {}) {
  require_same_grid(tau0.grid(), v_start.grid());
  require_same_grid(tau0.grid(), v_end.grid());
  constexpr int K = kSymComponents<Dim>;
  const auto v0 = detail::make_velocity_view<Dim>(spectra(v_start));
  const detail::TransportStage<Dim> stage(spectra(tau0), v0, dt, params, opts);
  auto out = stage.finish(detail::make_velocity_view<Dim>(spectra(v_end)));
  return field_from_spectra<SymTensorField<Dim>, Dim, K>(std::move(out));
}

/// One stress step along a frozen velocity.
template <int Dim>
SymTensorField<Dim> transport_step(const SymTensorField<Dim>& tau0, const VectorField<Dim>& v, double dt,
                                   const PhysicalParams& params, const TransportOptions& opts = {}) {
  require_same_grid(tau0.grid(), v.grid());
  constexpr int K = kSymComponents<Dim>;
  const auto view = detail::make_velocity_view<Dim>(spectra(v));
  const detail::TransportStage<Dim> stage(spectra(tau0), view, dt, params, opts);
  return field_from_spectra<SymTensorField<Dim>, Dim, K>(stage.finish(view));
}

}  // namespace oldroyd
