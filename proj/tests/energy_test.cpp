#include <gtest/gtest.h>

#include "support.hpp"

using namespace oldroyd;

namespace {

constexpr double kArea = 4.0 * std::numbers::pi * std::numbers::pi;

EnergyConstants constants_with(std::array<double, 6> kappa, double c0 = 1.0) {
  EnergyConstants c;
  c.kappa = kappa;
  c.c0 = c0;
  c.delta0 = compute_delta0(c.big_c, c.m1);
  return c;
}

FlowState<2> random_state(const Grid<2>& g, std::mt19937_64& rng, double scale) {
  auto s = FlowState<2>::zeros(g);
  s.u = scale * support::random_solenoidal(g, rng, 4);
  s.tau = scale * support::random_sym(g, rng, 4);
  return s;
}

// tau with a single off-diagonal entry cos x: div tau = (0, -sin x), curl div tau = -cos x.
FlowState<2> off_diagonal_stress(const Grid<2>& g) {
  auto s = FlowState<2>::zeros(g);
  s.tau(0, 1) = ScalarField<2>::sample(g, [](auto x) { return std::cos(x[0]); });
  return s;
}

}  // namespace

TEST(TimeDerivatives, ZeroState) {
  const auto g = support::grid<2>(16);
  const auto d = time_derivatives(FlowState<2>::zeros(g), PhysicalParams{});
  EXPECT_EQ(support::max_abs(d.du) + support::max_abs(d.dtau), 0.0);
}

TEST(TimeDerivatives, StressOnlySubstitution) {
  std::mt19937_64 rng(50);
  const auto g = support::grid<3>(16);
  auto s = FlowState<3>::zeros(g);
  s.tau = support::random_sym(g, rng, 3);
  const PhysicalParams p{2.0, 0.5, 0.7, 0.2};
  const auto d = time_derivatives(s, p);
  EXPECT_LT(support::max_diff(d.du, (1.0 / p.re) * project(divergence(s.tau))), 1e-13);
  EXPECT_LT(support::max_diff(d.dtau, (-1.0 / p.we) * s.tau), 1e-13);
}

TEST(TimeDerivatives, SatisfyProjectedMomentumEquation) {
  std::mt19937_64 rng(51);
  const auto g = support::grid<2>(32);
  const auto s = random_state(g, rng, 0.5);
  const PhysicalParams p{1.7, 0.9, 0.6, 1.0};
  const auto d = time_derivatives(s, p);
  const auto residual = p.re * (d.du + project(advect(s.u, s.u))) + (1.0 - p.alpha) * stokes_apply(s.u) -
                        project(divergence(s.tau));
  EXPECT_LE(support::max_abs(residual), 1e-11);
  EXPECT_LT(support::max_diff(d.dtau, stress_rhs(s.tau, s.u, p)), 1e-12);
}

TEST(Functionals, VanishOnZeroState) {
  const auto g = support::grid<2>(16);
  const auto z = FlowState<2>::zeros(g);
  const auto d = time_derivatives(z, PhysicalParams{});
  const auto c = constants_with({1, 1, 1, 1, 1, 1});
  EXPECT_EQ(compute_F(z, d, PhysicalParams{}, c), 0.0);
  EXPECT_EQ(compute_G(z, d, PhysicalParams{}, c), 0.0);
  EXPECT_EQ(compute_H(z, d, PhysicalParams{}), 0.0);
}

TEST(Functionals, StressOnlyClosedForm) {
  const auto g = support::grid<2>(32);
  const auto s = off_diagonal_stress(g);
  const PhysicalParams p{1.5, 0.8, 0.6, 1.0};
  const auto c = constants_with({2, 3, 4, 5, 6, 7}, 1.3);
  const auto d = time_derivatives(s, p);
  const double na = 1.0 - p.alpha;
  const double pdiv = kArea / 2, curl_div = kArea / 2;
  const double tau = kArea, tau_h2 = 4 * kArea;
  const double du = kArea / (2 * p.re * p.re), dtau = kArea / (p.we * p.we);
  const double grad_du = du;  // single |k| = 1 mode
  const double k4 = 5, k5 = 6, k6 = 7, k1 = 2;
  const double f = na * (k4 * c.c0 + 1) * p.we * (pdiv + curl_div) + p.we * (k6 + 1) / (2 * p.alpha * na) * tau +
                   p.we * tau_h2 + p.re * (k5 + 1) / na * du + p.we * (k5 + 1) / (2 * p.alpha * na) * dtau;
  const double gval = p.re * (k1 + 1) / na * du + tau_h2 + grad_du + (k5 + 1) / (p.alpha * na) * dtau + tau + pdiv +
                      curl_div;
  const double h = du + tau_h2 + dtau;
  EXPECT_NEAR(compute_F(s, d, p, c), f, 1e-12 * f);
  EXPECT_NEAR(compute_G(s, d, p, c), gval, 1e-12 * gval);
  EXPECT_NEAR(compute_H(s, d, p), h, 1e-12 * h);
}

TEST(Functionals, QuadraticScalingAtSmallAmplitude) {
  std::mt19937_64 rng(52);
  const auto g = support::grid<2>(32);
  const auto base = random_state(g, rng, 1.0);
  const PhysicalParams p{1.0, 1.0, 0.9, 0.0};
  const auto c = constants_with({1, 1, 1, 1, 1, 1});
  std::vector<double> ratio;
  for (double lambda : {1e-1, 1e-2, 1e-3, 1e-4}) {
    FlowState<2> s{0.0, lambda * base.u, lambda * base.tau};
    ratio.push_back(evaluate_report(s, p, c).f_val / (lambda * lambda));
  }
  for (std::size_t i = 2; i < ratio.size(); ++i) {
    EXPECT_LT(std::abs(ratio[i] - ratio[i - 1]), 0.2 * std::abs(ratio[i - 1] - ratio[i - 2]) + 1e-12 * ratio[i]);
  }
  EXPECT_NEAR(ratio[3], ratio[2], 1e-3 * ratio[2]);
}

TEST(Functionals, QuarticTermInH) {
  const auto g = support::grid<2>(32);
  auto s = FlowState<2>::zeros(g);
  // ||grad u||^2 = area/2 for u = (0, sin x); rescale to one
  s.u[1] = ScalarField<2>::sample(g, [](auto x) { return std::sqrt(2.0 / kArea) * std::sin(x[0]); });
  const auto n = energy_norms(s, PhysicalParams{});
  EXPECT_NEAR(n.grad_u, 1.0, 1e-13);
  EXPECT_NEAR(compute_H(n), n.du + n.au + n.tau_h2 + n.dtau + 1.0 + 1.0, 1e-13);
}

TEST(Functionals, NonnegativeOnRandomStates) {
  std::mt19937_64 rng(53);
  const auto g = support::grid<2>(16);
  const auto c = constants_with({1, 1, 1, 1, 1, 1});
  for (int trial = 0; trial < 10; ++trial) {
    const auto r = evaluate_report(random_state(g, rng, 0.1 * (trial + 1)), PhysicalParams{1, 1, 0.5, 0.5}, c);
    EXPECT_GT(r.f_val, 0.0);
    EXPECT_GT(r.g_val, 0.0);
    EXPECT_GT(r.h_val, 0.0);
  }
}

TEST(HelmholtzNorms, IsotropicStressHasNoSolenoidalDivergence) {
  std::mt19937_64 rng(54);
  const auto g = support::grid<3>(16);
  const auto [pdiv, curl_div] = ptau_norms(SymTensorField<3>::isotropic(support::random_scalar(g, rng, 4)));
  EXPECT_LT(pdiv, 1e-12);
  EXPECT_LT(curl_div, 1e-12);
}

TEST(HelmholtzNorms, CurlSeesOnlySolenoidalPartAndDivCurlIdentity) {
  std::mt19937_64 rng(55);
  const auto g = support::grid<3>(16);
  for (int trial = 0; trial < 5; ++trial) {
    const auto tau = support::random_sym(g, rng, 4);
    const auto div = divergence(tau);
    const auto w = project(div);
    EXPECT_LE(l2_norm(curl(div) - curl(w)), 1e-12);
    const double grad_w = std::pow(l2_norm(gradient(w)), 2);
    const double curl_w = std::pow(l2_norm(curl(w)), 2);
    EXPECT_NEAR(grad_w, curl_w, 1e-10 * grad_w);
    const auto [pdiv, curl_div] = ptau_norms(tau);
    EXPECT_NEAR(pdiv, l2_norm(w), 1e-12 * pdiv);
    EXPECT_NEAR(curl_div, l2_norm(curl(div)), 1e-12 * curl_div);
  }
}

TEST(EstimateM1, EmptyWhenOnlyZeroSamples) {
  const auto g = support::grid<2>(16);
  const std::vector<FlowState<2>> samples{FlowState<2>::zeros(g)};
  EXPECT_THROW((void)estimate_m1<2>(samples, PhysicalParams{}, EnergyConstants{}), EmptyEstimate);
  EXPECT_THROW((void)estimate_m1(std::span<const EnergyReport>{}), EmptyEstimate);
}

TEST(EstimateM1, StableUnderResamplingOfATrajectory) {
  SolverConfig cfg;
  cfg.grid.n = {32, 32};
  cfg.dt = 5e-3;
  cfg.t_end = 2.0;
  cfg.output_every = 1;
  cfg.initial.amplitude = 1e-3;
  cfg.initial.tau_fraction = 0.3;
  const auto r = run(cfg);
  ASSERT_EQ(r.exit_code, 0);
  std::vector<EnergyReport> even, odd;
  for (std::size_t i = 0; i < r.rows.size(); ++i) (i % 2 ? odd : even).push_back(r.rows[i]);
  const double all = estimate_m1(r.rows);
  EXPECT_GT(all, 0.0);
  EXPECT_TRUE(std::isfinite(all));
  EXPECT_NEAR(estimate_m1(even), all, 0.2 * all);
  EXPECT_NEAR(estimate_m1(odd), all, 0.2 * all);
  for (const auto& row : r.rows) EXPECT_LE(row.h_val, all * (row.f_val + row.f_val * row.f_val + std::pow(row.f_val, 3)) * (1 + 1e-12));
}

TEST(EstimateM1, ScaledCopiesAgreeInTheSmallLimit) {
  std::mt19937_64 rng(56);
  const auto g = support::grid<2>(16);
  const auto base = random_state(g, rng, 1.0);
  const PhysicalParams p{};
  const EnergyConstants c;
  const auto at = [&](double lambda) {
    const std::vector<FlowState<2>> one{FlowState<2>{0.0, lambda * base.u, lambda * base.tau}};
    return estimate_m1<2>(one, p, c);
  };
  // the ratio converges like F, i.e. lambda^2, so successive gaps shrink a hundredfold
  const double gap1 = std::abs(at(1e-4) - at(1e-5));
  const double gap2 = std::abs(at(1e-5) - at(1e-6));
  EXPECT_LT(gap2, 0.05 * gap1);
  EXPECT_NEAR(at(1e-6), at(1e-7), 1e-4 * at(1e-7));
}

TEST(EstimateM1, BoundHoldsOnRandomSmallSamples) {
  std::mt19937_64 rng(57);
  const auto g = support::grid<2>(16);
  std::vector<FlowState<2>> samples;
  for (int i = 0; i < 8; ++i) samples.push_back(random_state(g, rng, 1e-3 * (i + 1)));
  const PhysicalParams p{1, 1, 0.9, 0};
  const EnergyConstants c;
  const double m1 = estimate_m1<2>(samples, p, c);
  for (const auto& s : samples) {
    const auto r = evaluate_report(s, p, c);
    EXPECT_LE(r.h_val, m1 * (r.f_val + r.f_val * r.f_val + std::pow(r.f_val, 3)) * (1 + 1e-12));
  }
}

TEST(Delta0, RootsAndLimits) {
  // 1/(2 C M1) = 3 is hit by delta = 1
  EXPECT_NEAR(compute_delta0(1.0, 1.0 / 6.0), 1.0, 1e-6);
  EXPECT_LT(compute_delta0(1.0, 1.0 / 6.0), 1.0);
  EXPECT_LT(compute_delta0(1e8, 1.0), 1e-8);
  EXPECT_GT(compute_delta0(1e8, 1.0), 0.0);
  const double target = 0.111;
  const double d = compute_delta0(1.0, 1.0 / (2 * target));
  const double cubic = d + d * d + d * d * d;
  EXPECT_NEAR(cubic, target * (1 - 1e-6), 1e-9);
  EXPECT_LT(cubic, target);
  EXPECT_THROW((void)compute_delta0(0.0, 1.0), InvalidArgument);
  EXPECT_THROW((void)compute_delta0(1.0, -1.0), InvalidArgument);
}

TEST(EnergyConstants, Validation) {
  EnergyConstants c;
  c.delta0 = compute_delta0(c.big_c, c.m1);
  EXPECT_NO_THROW(c.validate());
  c.delta0 = 1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.delta0 = 0.1;
  c.kappa[2] = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  EXPECT_DOUBLE_EQ(EnergyConstants{}.kappa_n(1), 1.0);
}

TEST(Certificate, ZeroStateHasZeroMargin) {
  EnergyConstants c;
  c.delta0 = compute_delta0(1, 1);
  EnergyReport a, b;
  b.t = 0.1;
  const auto v = certificate_step(a, b, 0.1, c);
  EXPECT_EQ(v.margin, 0.0);
  EXPECT_TRUE(v.below_threshold);
  EXPECT_THROW((void)certificate_step(a, b, 0.0, c), InvalidArgument);
}

TEST(Certificate, ThresholdCrossingFlagsUncertified) {
  EnergyConstants c;
  c.delta0 = 0.1;
  EnergyReport a, b;
  a.f_val = 0.05;
  b.t = 1.0;
  b.f_val = 0.2;
  EXPECT_FALSE(certificate_step(a, b, 1.0, c).below_threshold);
  CertificateMonitor m(a, c);
  m.push(b);
  EXPECT_TRUE(m.initial_below_threshold());
  EXPECT_FALSE(m.threshold_held());
  EXPECT_FALSE(m.certified());
}

TEST(Certificate, MidpointResidualByHand) {
  EnergyConstants c;
  c.big_c = 2.0;
  c.delta0 = 0.2;
  EnergyReport a, b;
  a.f_val = 1.0, a.g_val = 2.0, a.h_val = 0.1;
  b.t = 0.5, b.f_val = 0.5, b.g_val = 4.0, b.h_val = 0.3;
  const auto v = certificate_step(a, b, 0.5, c);
  EXPECT_DOUBLE_EQ(v.df_dt, -1.0);
  EXPECT_DOUBLE_EQ(v.residual, -1.0 + 3.0 - 2.0 * 0.2 * 3.0);
  EXPECT_DOUBLE_EQ(v.margin, -v.residual);
}

TEST(Certificate, DecayingRunKeepsMarginsAndBudget) {
  SolverConfig cfg;
  cfg.grid.n = {32, 32};
  cfg.params = {1.0, 1.0, 0.9, 0.0};
  cfg.dt = 5e-3;
  cfg.t_end = 2.0;
  cfg.output_every = 2;
  cfg.initial.amplitude = 1e-3;
  cfg.energy.constants.kappa = {1, 1, 1, 1e3, 1e3, 1e5};
  const auto r = run(cfg);
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_TRUE(r.certified);
  for (std::size_t i = 1; i < r.rows.size(); ++i) {
    EXPECT_GE(r.rows[i].certificate_margin, -1e-3 * r.rows[i].g_val) << "row " << i;
  }
  EXPECT_LE(r.summary["max_budget_ratio"].get<double>(), 1.0 + 1e-3);
}

TEST(BigCEstimator, FloorAndRunningMax) {
  BigCEstimator est(1.0);
  EnergyReport a, b;
  a.f_val = 1.0, a.g_val = 1.0, a.h_val = 1.0;
  b.t = 1.0, b.f_val = 0.5, b.g_val = 1.0, b.h_val = 1.0;
  est.push(a, b);  // (-0.5 + 1) / 1
  EXPECT_DOUBLE_EQ(est.raw_max(), 0.5);
  EXPECT_DOUBLE_EQ(est.value(), 1.0);
  b.f_val = 3.0;
  est.push(a, b);
  EXPECT_DOUBLE_EQ(est.value(), 3.0);
  EXPECT_EQ(est.samples(), 2);
}

TEST(Monitors, ZeroStateIsAllSentinels) {
  const auto g = support::grid<2>(16);
  const auto z = FlowState<2>::zeros(g);
  const auto m = inequality_monitors(z, time_derivatives(z, PhysicalParams{}), PhysicalParams{});
  EXPECT_EQ(m.size(), 6u);
  for (const auto& [k, v] : m) EXPECT_TRUE(std::isnan(v)) << k;
}

TEST(Monitors, SingleModeGagliardoNirenbergRatio) {
  const auto g = support::grid<2>(32);
  auto s = FlowState<2>::zeros(g);
  s.u[1] = ScalarField<2>::sample(g, [](auto x) { return std::sin(x[0]); });
  const auto m = inequality_monitors(s, time_derivatives(s, PhysicalParams{}), PhysicalParams{});
  // ||u||_inf = 1, ||grad u||^2 = area/2, ||grad u||_{H1}^2 = area
  const double expected = 1.0 / (std::pow(kArea / 2, 0.25) * std::pow(kArea, 0.25));
  EXPECT_NEAR(m.at("GN"), expected, 1e-12);
}

TEST(Monitors, BoundedAlongSmallDataTrajectory) {
  SolverConfig cfg;
  cfg.grid.n = {32, 32};
  cfg.dt = 5e-3;
  cfg.t_end = 1.0;
  cfg.output_every = 5;
  cfg.initial.kind = InitialKind::random_smooth;
  cfg.initial.amplitude = 1e-3;
  cfg.initial.tau_fraction = 0.5;
  const auto r = run(cfg);
  ASSERT_EQ(r.exit_code, 0);
  const auto& mon = r.summary["monitors"];
  for (const char* key : {"GN", "Au_L2", "pdtau", "tau_H2"}) {
    ASSERT_TRUE(mon[key].contains("max")) << key;
    const double hi = mon[key]["max"].get<double>();
    const double lo = mon[key]["min"].get<double>();
    EXPECT_TRUE(std::isfinite(hi)) << key;
    EXPECT_LT(hi, 1e3 * std::max(std::abs(lo), 1e-12) + 10.0) << key;
  }
  // P div tau has no gradient part on the torus, so its H1 bound holds with constant 1
  EXPECT_NEAR(mon["pdtau"]["max"].get<double>(), 1.0, 1e-8);
  EXPECT_TRUE(std::isfinite(r.summary["energy_balance_constant"].get<double>()));
}
