#include <gtest/gtest.h>

#include "support.hpp"

using namespace oldroyd;

namespace {

VectorField<2> taylor_green(const Grid<2>& g, double amp = 1.0) {
  VectorField<2> u;
  u[0] = ScalarField<2>::sample(g, [&](auto x) { return amp * std::sin(x[0]) * std::cos(x[1]); });
  u[1] = ScalarField<2>::sample(g, [&](auto x) { return -amp * std::cos(x[0]) * std::sin(x[1]); });
  return u;
}

SymTensorField<2> integrate(SymTensorField<2> tau, const VectorField<2>& v, double dt, int steps,
                            const PhysicalParams& p) {
  for (int i = 0; i < steps; ++i) tau = transport_step(tau, v, dt, p);
  return tau;
}

}  // namespace

TEST(StressRhs, PureRelaxation) {
  std::mt19937_64 rng(30);
  const auto g = support::grid<3>(16);
  const auto tau = support::random_sym(g, rng, 3);
  const PhysicalParams p{1.0, 2.5, 0.4, 0.5};
  EXPECT_LT(support::max_diff(stress_rhs(tau, VectorField<3>::zeros(g), p), (-1.0 / p.we) * tau), 1e-14);
}

TEST(StressRhs, PureForcing) {
  std::mt19937_64 rng(31);
  const auto g = support::grid<3>(16);
  const auto v = support::random_solenoidal(g, rng, 3);
  const PhysicalParams p{1.0, 2.5, 0.4, 0.5};
  const auto expected = (2.0 * p.alpha / p.we) * deformation(v);
  EXPECT_LT(support::max_diff(stress_rhs(SymTensorField<3>::zeros(g), v, p), expected), 1e-13);
}

TEST(StressRhs, MatchesCompositionOfFieldOperators) {
  std::mt19937_64 rng(32);
  const auto g = support::grid<2>(32);
  const auto v = support::random_solenoidal(g, rng, 5);
  const auto tau = support::random_sym(g, rng, 5);
  const PhysicalParams p{1.0, 0.7, 0.6, -0.3};
  const auto expected = (1.0 / p.we) * (2.0 * p.alpha * deformation(v) - tau) - advect(v, tau) - g_a(tau, gradient(v), p.a);
  const auto r = stress_rhs(tau, v, p);
  EXPECT_LT(support::max_diff(r, SymTensorField<2>(expected)), 1e-12 * support::max_abs(expected));
  const auto full = r.full();
  EXPECT_LT(support::max_diff(full, full.transpose()), 1e-13);
}

TEST(TransportStep, RelaxationIsExact) {
  std::mt19937_64 rng(33);
  const auto g = support::grid<2>(16);
  const auto tau0 = support::random_sym(g, rng, 4);
  const auto zero = VectorField<2>::zeros(g);
  for (double we : {0.1, 1.0, 10.0}) {
    const PhysicalParams p{1.0, we, 0.5, 1.0};
    const double dt = 1e-3;
    EXPECT_LT(support::max_diff(transport_step(tau0, zero, dt, p), std::exp(-dt / we) * tau0), 1e-12);
    const auto tau = integrate(tau0, zero, dt, 1000, p);
    EXPECT_LE(l2_norm(tau - std::exp(-1000 * dt / we) * tau0), 1e-10 * l2_norm(tau0)) << "We = " << we;
  }
}

TEST(TransportStep, DecoupledLimitStaysZero) {
  const auto g = support::grid<2>(32);
  const PhysicalParams p{1.0, 1.0, 0.0, 1.0};
  const auto tau = integrate(SymTensorField<2>::zeros(g), taylor_green(g), 0.01, 50, p);
  EXPECT_EQ(support::max_abs(tau), 0.0);
}

TEST(TransportStep, SecondOrderUnderStepHalving) {
  const auto g = support::grid<2>(32);
  const auto v = taylor_green(g);
  const PhysicalParams p{1.0, 1.0, 0.5, 1.0};
  const double t_end = 0.5;
  std::vector<SymTensorField<2>> sol;
  for (int steps : {20, 40, 80}) sol.push_back(integrate(SymTensorField<2>::zeros(g), v, t_end / steps, steps, p));
  const double e1 = l2_norm(sol[0] - sol[1]);
  const double e2 = l2_norm(sol[1] - sol[2]);
  EXPECT_GE(std::log2(e1 / e2), 1.9) << e1 << " " << e2;
}

TEST(TransportStep, SymmetryPreservedOverManySteps) {
  std::mt19937_64 rng(34);
  const auto g = support::grid<3>(16);
  const auto v = support::random_solenoidal(g, rng, 2);
  const PhysicalParams p{1.0, 1.0, 0.5, 0.3};
  auto tau = support::random_sym(g, rng, 3);
  for (int i = 0; i < 20; ++i) tau = transport_step(tau, v, 1e-3, p);
  const auto full = tau.full();
  EXPECT_LE(support::max_diff(full, full.transpose()), 1e-13);
}

TEST(TransportStep, CflViolationPolicy) {
  const auto g = support::grid<2>(16);
  const auto v = taylor_green(g);
  const auto tau = SymTensorField<2>::zeros(g);
  const PhysicalParams p{};
  EXPECT_THROW((void)transport_step(tau, v, 0.5, p), CflViolation);
  try {
    (void)transport_step(tau, v, 0.5, p);
  } catch (const CflViolation& e) {
    EXPECT_NEAR(e.cfl(), 0.5 / (2 * std::numbers::pi / 16), 1e-12);
  }
  TransportOptions warn;
  warn.cfl_policy = CflPolicy::warn;
  int calls = 0;
  warn.on_cfl_warning = [&](double) { ++calls; };
  EXPECT_NO_THROW((void)transport_step(tau, v, 0.5, p, warn));
  EXPECT_GE(calls, 1);
  EXPECT_NEAR(cfl_number(1.0, 0.5, g), 0.5 / (2 * std::numbers::pi / 16), 1e-12);
}

TEST(TransportStep, NonPositiveStepRejected) {
  const auto g = support::grid<2>(16);
  EXPECT_THROW((void)transport_step(SymTensorField<2>::zeros(g), VectorField<2>::zeros(g), 0.0, PhysicalParams{}),
               InvalidArgument);
}

TEST(TransportStep, L2BalanceBoundedByFrozenVelocityEstimate) {
  // With div v = 0, d/dt We||tau||^2 + 2||tau||^2 = 4 alpha (D, tau) - 2 We (g_a, tau), and
  // |(g_a, tau)| <= 2|a| max|D| ||tau||^2. The discrete balance must respect this up to O(dt^2).
  std::mt19937_64 rng(35);
  const auto g = support::grid<2>(32);
  const auto v = support::random_solenoidal(g, rng, 3);
  const PhysicalParams p{1.0, 0.8, 0.7, 0.6};
  const double dt = 1e-3;
  const auto d = deformation(v);
  const double grad_v = l2_norm(gradient(v));
  const double d_inf = linf_norm(d);
  const double grad_v_h2 = sobolev_norm(gradient(v), 2);
  auto tau = support::random_sym(g, rng, 3);
  double c_emp = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto next = transport_step(tau, v, dt, p);
    const double n0 = l2_norm(tau), n1 = l2_norm(next);
    const double lhs = p.we * (n1 * n1 - n0 * n0) / dt + (n0 * n0 + n1 * n1);
    const double tau_mid = 0.5 * (n0 + n1);
    const double tau_sq_mid = 0.5 * (n0 * n0 + n1 * n1);
    const double bound = 4 * p.alpha * grad_v * tau_mid + 4 * p.we * std::abs(p.a) * d_inf * tau_sq_mid;
    EXPECT_LE(lhs, bound * (1 + 1e-3)) << "step " << i;
    c_emp = std::max(c_emp, (lhs - 4 * p.alpha * grad_v * tau_mid) / (grad_v_h2 * tau_sq_mid));
    tau = next;
  }
  EXPECT_TRUE(std::isfinite(c_emp));
  RecordProperty("empirical_L2_constant", std::to_string(c_emp));
}
