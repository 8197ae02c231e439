#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "oldroyd/calculus.hpp"
#include "oldroyd/detail/kernels.hpp"
#include "oldroyd/errors.hpp"
#include "oldroyd/field.hpp"
#include "oldroyd/leray.hpp"
#include "oldroyd/norms.hpp"
#include "oldroyd/picard.hpp"

namespace oldroyd {

/// Weights and constants of the energy certificate.
struct EnergyConstants {
  std::array<double, 6> kappa{1.0, 1.0, 1.0, 1.0, 1.0, 1.0};  // kappa[0] is kappa_1
  double c0 = 1.0;      // Helmholtz bound ||P div tau||_{H1}^2 <= c0 (...); exact with 1 on the torus
  double big_c = 1.0;   // constant of dF/dt + G <= C H G
  double m1 = 1.0;      // constant of H <= M1 (F + F^2 + F^3)
  double delta0 = 0.0;  // smallness threshold for F

  double kappa_n(int i) const { return kappa.at(static_cast<std::size_t>(i - 1)); }

  void validate() const {
    for (double k : kappa) {
      if (!(k > 0.0)) throw InvalidArgument("kappa weights must be positive");
    }
    if (!(c0 > 0.0) || !(big_c > 0.0) || !(m1 > 0.0) || !(delta0 > 0.0)) {
      throw InvalidArgument("energy constants must be positive");
    }
    const double p = delta0 + delta0 * delta0 + delta0 * delta0 * delta0;
    if (!(p < 1.0 / (2.0 * big_c * m1))) throw InvalidArgument("delta0 violates the threshold inequality");
  }
};

/// Time derivatives of a state taken from the equations of motion.
template <int Dim>
struct TimeDerivatives {
  VectorField<Dim> du;
  SymTensorField<Dim> dtau;
};

/// Squared norms entering F, G and H (all L2 unless the name says otherwise).
struct EnergyNorms {
  double u = 0.0;
  double grad_u = 0.0;
  double grad_u_h1 = 0.0;
  double grad_u_h2 = 0.0;
  double au = 0.0;
  double tau = 0.0;
  double tau_h2 = 0.0;
  double du = 0.0;
  double grad_du = 0.0;
  double dtau = 0.0;
  double pdiv_tau = 0.0;
  double curl_div_tau = 0.0;
  double pdiv_tau_h1 = 0.0;
  double pconv = 0.0;   // ||P (u.grad)u||^2
  double u_linf = 0.0;  // not squared
  // Instantaneous rates from the equations of motion.
  double d_basic = 0.0;   // d/dt (Re ||u||^2 + We/(2 alpha) ||tau||^2)
  double d_tau_h2 = 0.0;  // d/dt ||tau||_{H2}^2
};

namespace detail {

template <int Dim>
struct DerivativeSpectra {
  SpectralArray<Dim, Dim> du;
  SpectralArray<Dim, kSymComponents<Dim>> dtau;
  SpectralArray<Dim, Dim> pconv;
};

template <int Dim>
DerivativeSpectra<Dim> derivative_spectra(const SpectralArray<Dim, Dim>& u,
                                          const SpectralArray<Dim, kSymComponents<Dim>>& tau,
                                          const PhysicalParams& params) {
  constexpr int K = kSymComponents<Dim>;
  const auto view = make_velocity_view<Dim>(u);
  DerivativeSpectra<Dim> d;
  d.pconv = convection(view);
  spectral::project<Dim>(d.pconv);
  auto ptau = spectral::divergence<Dim>(tau);
  spectral::project<Dim>(ptau);
  auto pu = u;
  spectral::project<Dim>(pu);
  const auto au = spectral::negative_laplacian<Dim, Dim>(pu);
  const double nu = 1.0 - params.alpha;
  for (int i = 0; i < Dim; ++i) {
    d.du[i] = ptau[i];
    d.du[i].axpy(-nu, au[i]);
    d.du[i].axpy(-params.re, d.pconv[i]);
    d.du[i] *= 1.0 / params.re;
  }
  d.dtau = stress_nonlinear(view, make_stress_view<Dim>(tau), params);
  for (int k = 0; k < K; ++k) d.dtau[k].axpy(-1.0 / params.we, tau[k]);
  return d;
}

// Real part of the Plancherel inner product with multiplier (1 + |k|^2)^m, summed over components.
template <int Dim, int K>
double weighted_inner(const SpectralArray<Dim, K>& a, const SpectralArray<Dim, K>& b, int m, bool symmetric) {
  double acc = 0.0;
  for (int i = 0; i < K; ++i) {
    const auto& g = a[i].grid();
    const auto w = g.weight();
    const auto k2 = g.k2();
    double s = 0.0;
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      s += w[j] * std::pow(1.0 + k2[j], m) * std::real(a[i][j] * std::conj(b[i][j]));
    }
    acc += (symmetric ? SymTensorField<Dim>::multiplicity(i) : 1.0) * s * g.volume();
  }
  return acc;
}

template <int Dim>
EnergyNorms energy_norms(const SpectralArray<Dim, Dim>& u, const SpectralArray<Dim, kSymComponents<Dim>>& tau,
                         const DerivativeSpectra<Dim>& d, const PhysicalParams& params) {
  constexpr int K = kSymComponents<Dim>;
  EnergyNorms n;
  n.u = spectral::norm_squared<Dim, Dim>(u);
  n.grad_u = spectral::gradient_norm_squared<Dim>(u);
  n.grad_u_h1 = spectral::gradient_norm_squared<Dim>(u, 1);
  n.grad_u_h2 = spectral::gradient_norm_squared<Dim>(u, 2);
  auto pu = u;
  spectral::project<Dim>(pu);
  n.au = spectral::norm_squared<Dim, Dim>(spectral::negative_laplacian<Dim, Dim>(pu));
  n.tau = spectral::sym_norm_squared<Dim>(tau);
  n.tau_h2 = spectral::sym_norm_squared<Dim>(tau, 2);
  n.du = spectral::norm_squared<Dim, Dim>(d.du);
  n.grad_du = spectral::gradient_norm_squared<Dim>(d.du);
  n.dtau = spectral::sym_norm_squared<Dim>(d.dtau);
  auto pdiv = spectral::divergence<Dim>(tau);
  const auto cd = spectral::curl<Dim>(pdiv);
  spectral::project<Dim>(pdiv);
  n.pdiv_tau = spectral::norm_squared<Dim, Dim>(pdiv);
  n.pdiv_tau_h1 = spectral::norm_squared<Dim, Dim>(pdiv, 1);
  n.curl_div_tau = spectral::norm_squared<Dim, Dim == 2 ? 1 : 3>(cd);
  n.pconv = spectral::norm_squared<Dim, Dim>(d.pconv);
  double m2 = 0.0;
  {
    std::array<RealBuffer, Dim> v;
    for (int i = 0; i < Dim; ++i) v[i] = to_real(u[i]);
    for (std::size_t p = 0; p < v[0].size(); ++p) {
      double s = 0.0;
      for (int i = 0; i < Dim; ++i) s += v[i][p] * v[i][p];
      m2 = std::max(m2, s);
    }
  }
  n.u_linf = std::sqrt(m2);
  n.d_basic = 2.0 * params.re * weighted_inner<Dim, Dim>(u, d.du, 0, false) +
              params.we / params.alpha * weighted_inner<Dim, K>(tau, d.dtau, 0, true);
  n.d_tau_h2 = 2.0 * weighted_inner<Dim, K>(tau, d.dtau, 2, true);
  return n;
}

}  // namespace detail

/// du/dt = [P div tau - (1 - alpha) A u - Re P((u.grad)u)]/Re and d tau/dt from the stress equation.
template <int Dim>
TimeDerivatives<Dim> time_derivatives(const FlowState<Dim>& state, const PhysicalParams& params) {
  params.validate();
  require_same_grid(state.u.grid(), state.tau.grid());
  auto d = detail::derivative_spectra<Dim>(spectra(state.u), spectra(state.tau), params);
  return {field_from_spectra<VectorField<Dim>, Dim, Dim>(std::move(d.du)),
          field_from_spectra<SymTensorField<Dim>, Dim, kSymComponents<Dim>>(std::move(d.dtau))};
}

/// All squared norms of a state needed by the functionals, with PDE-consistent derivatives.
template <int Dim>
EnergyNorms energy_norms(const FlowState<Dim>& state, const PhysicalParams& params) {
  params.validate();
  const auto u = spectra(state.u);
  const auto tau = spectra(state.tau);
  return detail::energy_norms<Dim>(u, tau, detail::derivative_spectra<Dim>(u, tau, params), params);
}

/// Norms evaluated with caller-supplied derivatives.
template <int Dim>
EnergyNorms energy_norms(const FlowState<Dim>& state, const TimeDerivatives<Dim>& derivs, const PhysicalParams& params) {
  params.validate();
  const auto u = spectra(state.u);
  const auto tau = spectra(state.tau);
  auto d = detail::derivative_spectra<Dim>(u, tau, params);
  d.du = spectra(derivs.du);
  d.dtau = spectra(derivs.dtau);
  return detail::energy_norms<Dim>(u, tau, d, params);
}

inline double compute_F(const EnergyNorms& n, const PhysicalParams& p, const EnergyConstants& c) {
  const double na = 1.0 - p.alpha;
  return na * (c.kappa_n(4) * c.c0 + 1.0) * p.we * (n.pdiv_tau + n.curl_div_tau) +
         p.re * (c.kappa_n(6) + 1.0) / na * n.u + p.we * (c.kappa_n(6) + 1.0) / (2.0 * p.alpha * na) * n.tau +
         p.we * n.tau_h2 + (c.kappa_n(1) + 1.0) * (2.0 * p.re + na) / na * n.grad_u +
         p.re * (c.kappa_n(5) + 1.0) / na * n.du + p.we * (c.kappa_n(5) + 1.0) / (2.0 * p.alpha * na) * n.dtau;
}

inline double compute_G(const EnergyNorms& n, const PhysicalParams& p, const EnergyConstants& c) {
  const double na = 1.0 - p.alpha;
  return p.re * (c.kappa_n(1) + 1.0) / na * n.du + n.au + n.tau_h2 + n.grad_u_h2 + n.grad_du +
         (c.kappa_n(5) + 1.0) / (p.alpha * na) * n.dtau + n.grad_u + n.tau + n.pdiv_tau + n.curl_div_tau;
}

inline double compute_H(const EnergyNorms& n) {
  return n.du + n.au + n.tau_h2 + n.dtau + n.grad_u + n.grad_u * n.grad_u;
}

template <int Dim>
double compute_F(const FlowState<Dim>& s, const TimeDerivatives<Dim>& d, const PhysicalParams& p,
                 const EnergyConstants& c) {
  return compute_F(energy_norms(s, d, p), p, c);
}
template <int Dim>
double compute_G(const FlowState<Dim>& s, const TimeDerivatives<Dim>& d, const PhysicalParams& p,
                 const EnergyConstants& c) {
  return compute_G(energy_norms(s, d, p), p, c);
}
template <int Dim>
double compute_H(const FlowState<Dim>& s, const TimeDerivatives<Dim>& d, const PhysicalParams& p) {
  return compute_H(energy_norms(s, d, p));
}

/// (||P div tau||, ||curl div tau||) in L2.
template <int Dim>
std::pair<double, double> ptau_norms(const SymTensorField<Dim>& tau) {
  auto div = spectral::divergence<Dim>(spectra(tau));
  const auto cd = spectral::curl<Dim>(div);
  spectral::project<Dim>(div);
  return {std::sqrt(spectral::norm_squared<Dim, Dim>(div)), std::sqrt(spectral::norm_squared<Dim, Dim == 2 ? 1 : 3>(cd))};
}

/// One row of the energy time series.
struct EnergyReport {
  double t = 0.0;
  double f_val = 0.0;
  double g_val = 0.0;
  double h_val = 0.0;
  double df_dt = std::numeric_limits<double>::quiet_NaN();
  double certificate_margin = std::numeric_limits<double>::quiet_NaN();  // C H G - dF/dt - G
  EnergyNorms norms;
  int picard_iters = 0;

  double norm_u() const { return std::sqrt(norms.u); }
  double norm_grad_u() const { return std::sqrt(norms.grad_u); }
  double norm_au() const { return std::sqrt(norms.au); }
  double norm_tau() const { return std::sqrt(norms.tau); }
  double norm_tau_h2() const { return std::sqrt(norms.tau_h2); }
  double norm_du() const { return std::sqrt(norms.du); }
  double norm_dtau() const { return std::sqrt(norms.dtau); }
  double norm_pdiv_tau() const { return std::sqrt(norms.pdiv_tau); }
  double norm_curl_div_tau() const { return std::sqrt(norms.curl_div_tau); }
  double norm_grad_du() const { return std::sqrt(norms.grad_du); }
};

inline EnergyReport make_report(double t, const EnergyNorms& n, const PhysicalParams& p, const EnergyConstants& c) {
  EnergyReport r;
  r.t = t;
  r.norms = n;
  r.f_val = compute_F(n, p, c);
  r.g_val = compute_G(n, p, c);
  r.h_val = compute_H(n);
  return r;
}

template <int Dim>
EnergyReport evaluate_report(const FlowState<Dim>& state, const PhysicalParams& p, const EnergyConstants& c) {
  return make_report(state.t, energy_norms(state, p), p, c);
}

/// Largest delta with delta + delta^2 + delta^3 <= (1 - margin) / (2 C M1), by bisection.
inline double compute_delta0(double big_c, double m1, double margin = 1e-6) {
  if (!(big_c > 0.0) || !(m1 > 0.0) || !std::isfinite(big_c) || !std::isfinite(m1)) {
    throw InvalidArgument("compute_delta0 needs positive finite C and M1");
  }
  const double target = (1.0 - margin) / (2.0 * big_c * m1);
  const auto cubic = [](double d) { return d + d * d + d * d * d; };
  double lo = 0.0;
  double hi = std::max(1.0, target);
  for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (cubic(mid) <= target ? lo : hi) = mid;
  }
  return lo;
}

/// H/(F + F^2 + F^3), or NaN when the denominator is below 1e-14.
inline double hf_ratio(const EnergyReport& r) {
  const double den = r.f_val + r.f_val * r.f_val + r.f_val * r.f_val * r.f_val;
  return den < 1e-14 ? std::numeric_limits<double>::quiet_NaN() : r.h_val / den;
}

/// M1 estimate: max of H/(F + F^2 + F^3) over reports with a usable denominator.
inline double estimate_m1(std::span<const EnergyReport> reports) {
  double m = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto& r : reports) {
    const double q = hf_ratio(r);
    if (std::isnan(q)) continue;
    m = std::max(m, q);
    any = true;
  }
  if (!any) throw EmptyEstimate("no sample with F > 0 to estimate M1 from");
  return m;
}

template <int Dim>
double estimate_m1(std::span<const FlowState<Dim>> samples, const PhysicalParams& p, const EnergyConstants& c) {
  std::vector<EnergyReport> reports;
  reports.reserve(samples.size());
  for (const auto& s : samples) reports.push_back(evaluate_report(s, p, c));
  return estimate_m1(reports);
}

/// Outcome of checking one interval [t_prev, t_now] against the certificate.
struct CertificateVerdict {
  double df_dt = 0.0;
  double g_mid = 0.0;
  double h_mid = 0.0;
  double residual = 0.0;       // dF/dt + G_mid - C H_mid G_mid (<= 0 when the inequality holds)
  double margin = 0.0;         // -residual
  bool below_threshold = true; // F_now < delta0
  double budget = 0.0;         // F_now + (1/2) int_0^t G, when tracked by a monitor
  bool budget_ok = true;       // budget <= F(0) (1 + budget_rtol)
};

inline CertificateVerdict certificate_step(const EnergyReport& prev, const EnergyReport& now, double dt,
                                           const EnergyConstants& c) {
  if (!(dt > 0.0)) throw InvalidArgument("certificate interval must be positive");
  CertificateVerdict v;
  v.df_dt = (now.f_val - prev.f_val) / dt;
  v.g_mid = 0.5 * (prev.g_val + now.g_val);
  v.h_mid = 0.5 * (prev.h_val + now.h_val);
  v.residual = v.df_dt + v.g_mid - c.big_c * v.h_mid * v.g_mid;
  v.margin = -v.residual;
  v.below_threshold = now.f_val < c.delta0;
  v.budget = now.f_val + 0.5 * v.g_mid * dt;
  v.budget_ok = v.budget <= prev.f_val;
  return v;
}

/// Running certificate over a time series: threshold, inequality residuals and the budget
/// F(t) + (1/2) int_0^t G ds against F(0).
class CertificateMonitor {
 public:
  CertificateMonitor(const EnergyReport& initial, const EnergyConstants& c, double budget_rtol = 1e-3)
      : constants_(c), rtol_(budget_rtol), f0_(initial.f_val), last_(initial) {
    certified_ = initial.f_val < c.delta0;
    initial_below_ = certified_;
    max_f_ = initial.f_val;
  }

  CertificateVerdict push(const EnergyReport& now) {
    const double dt = now.t - last_.t;
    auto v = certificate_step(last_, now, dt, constants_);
    g_integral_ += v.g_mid * dt;
    v.budget = now.f_val + 0.5 * g_integral_;
    v.budget_ok = v.budget <= f0_ * (1.0 + rtol_);
    max_residual_ = std::max(max_residual_, v.residual);
    max_f_ = std::max(max_f_, now.f_val);
    max_budget_ratio_ = f0_ > 0.0 ? std::max(max_budget_ratio_, v.budget / f0_) : max_budget_ratio_;
    if (!v.below_threshold) threshold_ok_ = false;
    if (!v.budget_ok) budget_ok_ = false;
    certified_ = certified_ && v.below_threshold && v.budget_ok;
    last_ = now;
    return v;
  }

  bool certified() const { return certified_; }
  bool initial_below_threshold() const { return initial_below_; }
  bool threshold_held() const { return threshold_ok_; }
  bool budget_held() const { return budget_ok_; }
  double g_integral() const { return g_integral_; }
  double max_f() const { return max_f_; }
  double max_residual() const { return max_residual_; }
  double max_budget_ratio() const { return max_budget_ratio_; }
  double f0() const { return f0_; }

 private:
  EnergyConstants constants_;
  double rtol_;
  double f0_;
  EnergyReport last_;
  double g_integral_ = 0.0;
  double max_f_ = 0.0;
  double max_residual_ = -std::numeric_limits<double>::infinity();
  double max_budget_ratio_ = 1.0;
  bool certified_ = true;
  bool initial_below_ = true;
  bool threshold_ok_ = true;
  bool budget_ok_ = true;
};

/// Running estimate of the certificate constant: max of (dF/dt + G)/(H G) over intervals,
/// never below `floor`.
class BigCEstimator {
 public:
  explicit BigCEstimator(double floor = 1.0) : floor_(floor) {}

  void push(const EnergyReport& prev, const EnergyReport& now) {
    const double dt = now.t - prev.t;
    if (!(dt > 0.0)) return;
    const double g = 0.5 * (prev.g_val + now.g_val);
    const double h = 0.5 * (prev.h_val + now.h_val);
    if (h * g < 1e-14) return;
    const double q = ((now.f_val - prev.f_val) / dt + g) / (h * g);
    raw_max_ = std::max(raw_max_, q);
    ++samples_;
  }

  double value() const { return std::max(floor_, raw_max_); }
  double raw_max() const { return raw_max_; }
  int samples() const { return samples_; }

 private:
  double floor_;
  double raw_max_ = -std::numeric_limits<double>::infinity();
  int samples_ = 0;
};

/// Empirical ratios of the individual a priori estimates with every constant set to 1.
/// Ratios whose denominator is below 1e-14 are reported as NaN (skipped).
inline std::map<std::string, double> inequality_monitors(const EnergyNorms& n, const PhysicalParams& p) {
  const auto ratio = [](double num, double den) {
    return den < 1e-14 ? std::numeric_limits<double>::quiet_NaN() : num / den;
  };
  const double na = 1.0 - p.alpha;
  const double a2 = p.alpha * p.alpha;
  std::map<std::string, double> m;
  m["utau_L2"] = ratio(n.d_basic + na * n.grad_u + n.tau / p.alpha,
                       p.we * p.we / (na * a2) * n.tau_h2 * n.tau_h2);
  m["tau_H2"] = ratio(p.we * n.d_tau_h2 + n.tau_h2, a2 * n.grad_u_h2 + p.we * p.we / a2 * n.tau_h2 * n.tau_h2);
  m["Au_L2"] = ratio(n.au, n.grad_u + n.du + n.pdiv_tau + n.grad_u * n.grad_u * n.grad_u);
  m["GN"] = ratio(n.u_linf, std::pow(n.grad_u, 0.25) * std::pow(n.grad_u_h1, 0.25));
  m["convection"] = ratio(n.pconv, std::pow(n.grad_u, 1.5) * std::sqrt(n.grad_u_h1));
  m["pdtau"] = ratio(n.pdiv_tau_h1, n.pdiv_tau + n.curl_div_tau);
  return m;
}

template <int Dim>
std::map<std::string, double> inequality_monitors(const FlowState<Dim>& state, const TimeDerivatives<Dim>& d,
                                                  const PhysicalParams& p) {
  return inequality_monitors(energy_norms(state, d, p), p);
}

}  // namespace oldroyd
