#include <cmath>

#include <gtest/gtest.h>

#include "wavelab/height_solver.hpp"
#include "wavelab/laminar.hpp"

using namespace wavelab;

namespace {

constexpr double g = 9.81;

std::vector<double> nodes(double p0, double p1, int n) {
  std::vector<double> p(n);
  for (int k = 0; k < n; ++k) p[k] = p0 + (p1 - p0) * k / (n - 1);
  return p;
}

} // namespace

TEST(SolveLaminar, IrrotationalLinearProfile) {
  // h = (p + 1) lambda with lambda = 1 gives Q = 2g + 1 and h(0) = 1.
  const auto prof = solve_laminar(VorticitySpec::zero(), g, -1.0, 2 * g + 1.0, 33);
  EXPECT_NEAR(prof.depth(), 1.0, 1e-12);
  for (std::size_t k = 0; k < prof.p.size(); ++k) {
    EXPECT_NEAR(prof.h[k], prof.p[k] + 1.0, 1e-12);
    EXPECT_NEAR(prof.hp[k], 1.0, 1e-12);
  }
  EXPECT_EQ(prof.h.front(), 0.0);
  EXPECT_LT(std::abs(prof.surface_residual(g)), 1e-10);
}

TEST(SolveLaminar, ConstantVorticityClosedForm) {
  // h_p = (1 - 2(p + 1))^(-1/2), singular at p = -0.5; h = 1 - sqrt(1 - 2(p + 1)).
  const auto spec = VorticitySpec::constant(1.0);
  const auto p = nodes(-1.0, -0.6, 41);
  const auto exact = integrate_laminar(spec, 1.0, p, LaminarScheme::exact);
  const auto rk4 = integrate_laminar(spec, 1.0, p, LaminarScheme::rk4);
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double s = 1.0 - 2.0 * (p[k] + 1.0);
    EXPECT_NEAR(exact.hp[k], 1.0 / std::sqrt(s), 1e-13);
    EXPECT_NEAR(exact.h[k], 1.0 - std::sqrt(s), 1e-13);
    EXPECT_NEAR(rk4.h[k], exact.h[k], 1e-8);
    EXPECT_NEAR(rk4.hp[k], exact.hp[k], 1e-8 * exact.hp[k]);
  }
}

TEST(SolveLaminar, ClosedFormAndRk4AgreeOnFullFamily) {
  const auto spec = VorticitySpec::constant(0.6);
  const auto a = solve_laminar(spec, g, -1.0, 25.0, 65, LaminarScheme::exact);
  const auto b = solve_laminar(spec, g, -1.0, 25.0, 65, LaminarScheme::rk4);
  for (std::size_t k = 0; k < a.h.size(); ++k) EXPECT_NEAR(a.h[k], b.h[k], 1e-8);
  EXPECT_LT(std::abs(a.surface_residual(g)), 1e-10);
}

TEST(SolveLaminar, AffineSatisfiesTheOde) {
  const auto spec = VorticitySpec::affine(1.0);
  const auto prof = solve_laminar(spec, g, -1.0, 25.0, 129, LaminarScheme::exact);
  EXPECT_EQ(prof.h.front(), 0.0);
  EXPECT_LT(std::abs(prof.surface_residual(g)), 1e-10);
  // h_pp = gamma(-p) h_p^3, checked with fourth-order differences of h_p.
  const double dp = prof.p[1] - prof.p[0];
  double worst = 0.0;
  for (std::size_t k = 2; k + 2 < prof.p.size(); ++k) {
    const double hpp = (-prof.hp[k + 2] + 8 * prof.hp[k + 1] - 8 * prof.hp[k - 1] + prof.hp[k - 2]) / (12 * dp);
    worst = std::max(worst, std::abs(hpp - spec.gamma_of_p(prof.p[k]) * std::pow(prof.hp[k], 3)));
  }
  EXPECT_LT(worst, 1e-6);
  for (std::size_t k = 1; k < prof.h.size(); ++k) {
    EXPECT_GT(prof.h[k], prof.h[k - 1]);
    EXPECT_GT(prof.hp[k], 0.0);
  }
}

TEST(SolveLaminar, GridSchemeIsADiscreteSolution) {
  const auto spec = VorticitySpec::affine(0.5, 0.2);
  const auto prof = solve_laminar(spec, g, -1.0, 25.0, 33, LaminarScheme::grid);
  PhysicalParams params{.g = g, .p0 = -1.0, .Q = prof.Q};
  const auto f = laminar_field(prof, 17, params, spec);
  EXPECT_LT(max_norm(assemble_residual(f).values()), 1e-10);
}

TEST(SolveLaminar, HeadBelowCriticalHasNoSlope) {
  EXPECT_THROW(solve_laminar(VorticitySpec::zero(), g, -1.0, 5.0, 33), NoRealSlopeError);
}

TEST(BifurcationHead, ReproducesTheDispersionRelation) {
  // Unit depth: p0 = -sqrt(g tanh 1), c0^2 = g tanh 1 and Q* = c0^2 + 2g.
  const double c2 = g * std::tanh(1.0);
  const auto b = bifurcation_head(VorticitySpec::zero(), g, -std::sqrt(c2), 257);
  EXPECT_NEAR(b.laminar.depth(), 1.0, 1e-4);
  const double u2 = 1.0 / (b.laminar.hp.back() * b.laminar.hp.back());
  EXPECT_NEAR(u2 / c2, 1.0, 1e-4);
  EXPECT_NEAR(b.Q_star / (c2 + 2 * g), 1.0, 1e-4);
  EXPECT_NEAR(b.mode.back(), 1.0, 1e-12);
  // The mode of the irrotational problem is sinh(p - p0) shaped.
  const auto& p = b.laminar.p;
  for (std::size_t k = 0; k < p.size(); k += 32) {
    EXPECT_NEAR(b.mode[k], std::sinh(b.laminar.h[k]) / std::sinh(b.laminar.depth()), 1e-3);
  }
}

TEST(BifurcationHead, ContinuousInConstantVorticity) {
  const double p0 = -std::sqrt(g * std::tanh(1.0));
  const double q0 = bifurcation_head(VorticitySpec::zero(), g, p0, 129).Q_star;
  double prev = std::numeric_limits<double>::infinity();
  for (double g0 : {0.1, 0.01, 0.001}) {
    const double gap = std::abs(bifurcation_head(VorticitySpec::constant(g0), g, p0, 129).Q_star - q0);
    EXPECT_LT(gap, prev);
    prev = gap;
  }
  EXPECT_LT(prev, 1e-2);
}

TEST(BifurcationHead, DimensionalScaling) {
  // g -> 2g, p0 -> sqrt2 p0, gamma -> sqrt2 gamma leaves h unchanged and doubles Q.
  const double r = std::sqrt(2.0);
  const auto a = bifurcation_head(VorticitySpec::affine(0.4, 0.3), g, -2.0, 129);
  const auto b = bifurcation_head(VorticitySpec::affine(0.4, 0.3 * r), 2 * g, -2.0 * r, 129);
  EXPECT_NEAR(b.Q_star / a.Q_star, 2.0, 1e-8);
  EXPECT_NEAR(b.laminar.depth(), a.laminar.depth(), 1e-8);
}

TEST(BifurcationHead, ShallowNearCriticalFlow) {
  // p0 = -1 puts the bifurcation within a percent of critical flow.
  const auto b = bifurcation_head(VorticitySpec::zero(), g, -1.0, 65);
  const double d = b.laminar.depth();
  const double c2 = 1.0 / (d * d);
  EXPECT_NEAR(c2, g * std::tanh(d), 1e-3 * c2);
}

TEST(LaminarCsv, HasHeaderAndRows) {
  const auto prof = solve_laminar(VorticitySpec::zero(), g, -1.0, 2 * g + 1.0, 9);
  std::ostringstream os;
  write_csv(os, prof);
  const auto s = os.str();
  EXPECT_EQ(s.rfind("p,h,h_p\n", 0), 0u);
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 10);
}
