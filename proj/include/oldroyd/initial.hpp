#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "oldroyd/calculus.hpp"
#include "oldroyd/config.hpp"
#include "oldroyd/errors.hpp"
#include "oldroyd/field.hpp"
#include "oldroyd/io.hpp"
#include "oldroyd/leray.hpp"
#include "oldroyd/norms.hpp"
#include "oldroyd/picard.hpp"

namespace oldroyd {

/// ||A u||_{L2} + ||u||_{H1}, the velocity part of the initial-data size.
template <int Dim>
double velocity_data_norm(const VectorField<Dim>& u) {
  return l2_norm(stokes_apply(u)) + sobolev_norm(u, 1);
}

/// ||A u0|| + ||u0||_{H1} + ||tau0||_{H2}.
template <int Dim>
double initial_data_norm(const FlowState<Dim>& s) {
  return velocity_data_norm(s.u) + sobolev_norm(s.tau, 2);
}

namespace detail {

template <int Dim>
VectorField<Dim> taylor_green_shape(const Grid<Dim>& grid) {
  const auto& L = grid.spec().box_length;
  VectorField<Dim> u;
  if constexpr (Dim == 2) {
    const double kx = 2.0 * std::numbers::pi / L[0];
    const double ky = 2.0 * std::numbers::pi / L[1];
    u[0] = ScalarField<2>::sample(grid, [&](auto x) { return std::sin(kx * x[0]) * std::cos(ky * x[1]); });
    u[1] = ScalarField<2>::sample(grid, [&](auto x) { return -(kx / ky) * std::cos(kx * x[0]) * std::sin(ky * x[1]); });
  } else {
    const double kx = 2.0 * std::numbers::pi / L[0];
    const double ky = 2.0 * std::numbers::pi / L[1];
    const double kz = 2.0 * std::numbers::pi / L[2];
    u[0] = ScalarField<3>::sample(
        grid, [&](auto x) { return std::sin(kx * x[0]) * std::cos(ky * x[1]) * std::cos(kz * x[2]); });
    u[1] = ScalarField<3>::sample(
        grid, [&](auto x) { return -(kx / ky) * std::cos(kx * x[0]) * std::sin(ky * x[1]) * std::cos(kz * x[2]); });
    u[2] = ScalarField<3>(grid);
  }
  return u;
}

template <int Dim>
VectorField<Dim> single_mode_shape(const Grid<Dim>& grid, const std::vector<int>& mode) {
  std::array<double, Dim> k{};
  double k2 = 0.0;
  for (int d = 0; d < Dim; ++d) {
    k[d] = 2.0 * std::numbers::pi / grid.spec().box_length[d] * mode.at(static_cast<std::size_t>(d));
    k2 += k[d] * k[d];
  }
  if (k2 == 0.0) throw InvalidArgument("single_mode needs a nonzero wavevector");
  std::array<double, Dim> dir{};
  if constexpr (Dim == 2) {
    dir = {-k[1], k[0]};
  } else {
    // cross product with the axis least aligned with k
    int axis = 0;
    for (int d = 1; d < 3; ++d) {
      if (std::abs(k[d]) < std::abs(k[axis])) axis = d;
    }
    std::array<double, 3> e{};
    e[axis] = 1.0;
    dir = {k[1] * e[2] - k[2] * e[1], k[2] * e[0] - k[0] * e[2], k[0] * e[1] - k[1] * e[0]};
  }
  VectorField<Dim> u;
  for (int i = 0; i < Dim; ++i) {
    u[i] = ScalarField<Dim>::sample(grid, [&](auto x) {
      double phase = 0.0;
      for (int d = 0; d < Dim; ++d) phase += k[d] * x[d];
      return dir[i] * std::sin(phase);
    });
  }
  return u;
}

template <int Dim>
VectorField<Dim> random_smooth_shape(const Grid<Dim>& grid, std::uint64_t seed, double cutoff) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  SpectralArray<Dim, Dim> s;
  const auto k2 = grid.k2();
  for (int i = 0; i < Dim; ++i) {
    RealBuffer v(grid.real_size());
    for (double& x : v) x = normal(rng);
    s[i] = SpectralCoeffs<Dim>(grid);
    grid.forward(v, s[i].data());
    for (std::size_t m = 0; m < s[i].size(); ++m) {
      const double kk = std::sqrt(k2[m]);
      if (kk > cutoff) s[i][m] *= std::exp(-(kk - cutoff));
    }
    s[i].truncate();
    s[i][0] = 0.0;
  }
  spectral::project<Dim>(s);
  return field_from_spectra<VectorField<Dim>, Dim, Dim>(std::move(s));
}

template <int Dim>
VectorField<Dim> velocity_shape(const SolverConfig& cfg, const Grid<Dim>& grid) {
  switch (cfg.initial.kind) {
    case InitialKind::taylor_green:
      return taylor_green_shape(grid);
    case InitialKind::single_mode:
      return single_mode_shape(grid, cfg.initial.mode);
    case InitialKind::random_smooth:
      return random_smooth_shape(grid, cfg.seed, cfg.initial.cutoff);
    case InitialKind::from_checkpoint:
      break;
  }
  throw InvalidArgument("no velocity shape for this initial condition kind");
}

}  // namespace detail

/// Initial state for a config. Generated data is divergence-free, mean-zero and band-limited,
/// scaled so ||A u0|| + ||u0||_{H1} = (1 - f) * amplitude and ||tau0||_{H2} = f * amplitude with
/// f = tau_fraction; tau0 has the shape of the deformation of the velocity shape.
template <int Dim>
FlowState<Dim> make_initial(const SolverConfig& cfg) {
  if (cfg.initial.kind == InitialKind::from_checkpoint) {
    auto ck = read_checkpoint<Dim>(cfg.initial.checkpoint, cfg.grid.dealias);
    if (!(ck.state.grid() == Grid<Dim>(cfg.grid.spec<Dim>()))) {
      throw InvalidArgument("checkpoint grid does not match the configured grid");
    }
    return ck.state;
  }
  const Grid<Dim> grid(cfg.grid.spec<Dim>());
  auto state = FlowState<Dim>::zeros(grid);
  const double amp = cfg.initial.amplitude;
  if (amp == 0.0) return state;

  const auto shape = detail::velocity_shape<Dim>(cfg, grid);
  const double f = cfg.initial.tau_fraction;
  const double u_target = (1.0 - f) * amp;
  const double tau_target = f * amp;
  if (u_target > 0.0) {
    const double n = velocity_data_norm(shape);
    if (!(n > 0.0)) throw InvalidArgument("initial velocity shape is zero; requested amplitude is unreachable");
    state.u = (u_target / n) * shape;
  }
  if (tau_target > 0.0) {
    const auto tshape = deformation(shape);
    const double n = sobolev_norm(tshape, 2);
    if (!(n > 0.0)) throw InvalidArgument("initial stress shape is zero; requested amplitude is unreachable");
    state.tau = (tau_target / n) * tshape;
  }
  return state;
}

}  // namespace oldroyd
