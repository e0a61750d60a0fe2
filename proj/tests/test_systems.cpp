#include <cmath>

#include <gtest/gtest.h>

#include "nhint/continuous_flow.hpp"
#include "nhint/exact_discrete.hpp"
#include "nhint/systems.hpp"
#include "test_support.hpp"

using namespace nhint;
using nhint::testing::vec3;
namespace pc = nhint::systems::particle;

TEST(Systems, ParticleSpotValues)
{
  const auto m = systems::make_particle(0.5);
  const Vec q0 = vec3(0, 0, 0);
  const Vec q1 = vec3(0.4, 0.4, 0.08);
  EXPECT_NEAR(m.mla.constraints_d.value(q0, q1)[0], 0.0, 1e-16);
  EXPECT_NEAR(m.mla.lagrangian_d.value(q0, q1), 0.3264, 1e-15);
  const double c = 4 * 0.16 / 4.16;
  EXPECT_NEAR(c, 0.1538462, 1e-7);
  EXPECT_LT((m.mla.forces_d.plus(q0, q1) - c * vec3(-0.2, 0, 1)).norm(), 1e-15);
  EXPECT_LT((m.mla.forces_d.minus(q0, q1) - c * vec3(-0.2, 0, 1)).norm(), 1e-15);
  EXPECT_EQ(m.dla.forces_d.plus(q0, q1), Vec::Zero(3));
  EXPECT_EQ(m.coordinate_names, (std::vector<std::string>{"x", "y", "z"}));
  EXPECT_EQ(m.constrained_slot, 2);
  EXPECT_NO_THROW(validate_at(m.system, vec3(0.3, -0.4, 1), vec3(1, 0.2, -0.4)));
}

TEST(Systems, ParticleAnalyticDerivativesMatchFiniteDifferences)
{
  const auto m = systems::make_particle(0.5);
  nhint::testing::Sampler s(41);
  for (int i = 0; i < 20; ++i) {
    const Vec a = s.box(3, 1.0);
    const Vec b = a + s.box(3, 0.5);
    const DiscreteLagrangian fd{m.mla.lagrangian_d.value, {}, {}};
    EXPECT_LT((fd.slot1_derivative(a, b) - m.mla.lagrangian_d.slot1_derivative(a, b)).norm(), 1e-7);
    EXPECT_LT((fd.slot2_derivative(a, b) - m.mla.lagrangian_d.slot2_derivative(a, b)).norm(), 1e-7);
    Mat jac(1, 3);
    for (int j = 0; j < 3; ++j) {
      Vec e = Vec::Zero(3);
      e[j] = 1e-6;
      jac(0, j) = (m.mla.constraints_d.value(a, b + e)[0] - m.mla.constraints_d.value(a, b - e)[0]) / 2e-6;
    }
    EXPECT_LT((jac - m.mla.constraints_d.d_omega_q1(a, b)).norm(), 1e-8);
  }
}

TEST(Systems, ClosedFlowExamples)
{
  const auto s = pc::closed_flow({vec3(0, 0, 0), vec3(1, 1, 0)}, 1.0);
  EXPECT_NEAR(s.q[0], 0.8813736, 1e-7);
  EXPECT_NEAR(s.q[1], 1.0, 1e-15);
  EXPECT_NEAR(s.q[2], 0.4142136, 1e-7);
  const auto line = pc::closed_flow({vec3(0, 0.5, 0), vec3(1, 0, 0.5)}, 2.0);
  EXPECT_LT((line.q - vec3(2, 0.5, 1)).norm(), 1e-15);
  const State start{vec3(0.3, -0.2, 0.1), vec3(0.5, 0.7, -0.1)};
  const auto zero = pc::closed_flow(start, 0.0);
  EXPECT_LT((zero.q - start.q).norm(), 1e-15);
  EXPECT_LT((zero.v - start.v).norm(), 1e-15);
}

TEST(Systems, ClosedFlowAgreesWithRk4)
{
  const auto m = systems::make_particle(0.5);
  nhint::testing::Sampler s(43);
  for (int i = 0; i < 20; ++i) {
    const Vec q = s.box(3, 1.0);
    const State start{q, s.admissible(m.system, q, 2.0)};
    const auto traj = integrate(m.system, start, 1e-3, 2000);
    for (std::size_t k = 0; k < traj.states.size(); k += 100) {
      const auto exact = pc::closed_flow(start, traj.times[k]);
      ASSERT_LT((traj.states[k].q - exact.q).lpNorm<Eigen::Infinity>(), 1e-8);
      ASSERT_LT((traj.states[k].v - exact.v).lpNorm<Eigen::Infinity>(), 1e-8);
    }
  }
}

TEST(Systems, RetractionClosedExamples)
{
  const Vec v = pc::retraction_closed(vec3(0, 0, 0), vec3(std::asinh(0.5), 0.5, std::sqrt(1.25) - 1), 0.5);
  EXPECT_LT((v - vec3(1, 1, 0)).lpNorm<Eigen::Infinity>(), 1e-10);
  const Vec w = pc::retraction_closed(vec3(0, 0.5, 0), vec3(0.5, 0.5, 0.25), 0.5);
  EXPECT_LT((w - vec3(1, 0, 0.5)).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Systems, RetractionClosedAgreesWithShooting)
{
  const auto m = systems::make_particle(0.5);
  nhint::testing::Sampler s(47);
  for (double h : {0.1, 0.5}) {
    for (int i = 0; i < 20; ++i) {
      const Vec q0 = s.box(3, 1.0);
      const Vec v0 = s.admissible(m.system, q0, 2.0);
      const ConfigPair pair{q0, pc::closed_flow({q0, v0}, h).q, h};
      const Vec closed = pc::retraction_closed(pair.q0, pair.q1, h);
      EXPECT_LT((closed - v0).lpNorm<Eigen::Infinity>(), 1e-10);
      EXPECT_LT((retraction_shoot(m.system, pair).v0 - closed).lpNorm<Eigen::Infinity>(), 1e-8);
    }
  }
}

TEST(Systems, MuDExamples)
{
  nhint::testing::Sampler s(53);
  for (int i = 0; i < 10; ++i) {
    const Vec q0 = s.box(3, 1.0);
    const Vec v0 = vec3(1, 0, 0) * s.uniform(-1, 1) + vec3(0, 1, 0) * s.uniform(-1, 1);
    const Vec v = vec3(v0[0], v0[1], q0[1] * v0[0]);
    EXPECT_LT(std::abs(pc::mu_d(q0, pc::closed_flow({q0, v}, 0.5).q, 0.5)), 1e-12);
  }
  EXPECT_NEAR(pc::mu_d(vec3(0, 0, 0), vec3(1, 1, 0), 1.0), -(std::sqrt(2.0) - 1) / std::asinh(1.0), 1e-15);
  EXPECT_NEAR(pc::mu_d(vec3(0, 0, 0), vec3(1, 1, 0), 1.0), -0.4699637, 1e-7);
  EXPECT_EQ(pc::mu_d(vec3(0, 0, 0), vec3(0.5, 0, 0), 0.7), 0.0);
}

TEST(Systems, MuDBranchesAreContinuous)
{
  // Near y1 = y0 the general formula must agree with (dz - ybar dx) / h.
  for (const double y0 : {0.0, 0.3, -1.2}) {
    const Vec q0 = vec3(0.1, y0, 0.2);
    const Vec q1 = vec3(0.6, y0 + 1e-4, 0.5);
    const double ybar = y0 + 0.5e-4;
    EXPECT_NEAR(pc::mu_d(q0, q1, 0.5), (0.3 - ybar * 0.5) / 0.5, 1e-6);
  }
}

TEST(Systems, MuDGradientMatchesFiniteDifferences)
{
  nhint::testing::Sampler s(59);
  for (int i = 0; i < 20; ++i) {
    const Vec a = s.box(3, 1.0);
    const Vec b = a + s.box(3, 0.8);
    const Vec g = pc::mu_d_gradient(a, b, 0.5);
    for (int j = 0; j < 6; ++j) {
      Vec da = a;
      Vec db = b;
      Vec ma = a;
      Vec mb = b;
      (j < 3 ? da[j] : db[j - 3]) += 1e-6;
      (j < 3 ? ma[j] : mb[j - 3]) -= 1e-6;
      EXPECT_NEAR(g[j], (pc::mu_d(da, db, 0.5) - pc::mu_d(ma, mb, 0.5)) / 2e-6, 1e-6);
    }
  }
}

TEST(Systems, MlaUpdateExamples)
{
  const auto up = pc::mla_update(vec3(0, 0, 0), vec3(0.4, 0.4, 0.08), 0.5);
  EXPECT_NEAR(up.x2, 0.4 + 0.4 * 1.1184615 / 1.2694118, 1e-6);
  EXPECT_NEAR(up.x2, 0.7524344, 1e-6);
  EXPECT_EQ(up.y2, 0.8);
  const auto frozen = pc::mla_update(vec3(0.1, 0.3, 0), vec3(0.6, 0.3, 0.15), 0.5);
  EXPECT_NEAR(frozen.x2, 1.1, 1e-15);
  EXPECT_EQ(frozen.y2, 0.3);
}

TEST(Systems, AsinhDifference)
{
  for (const double y0 : {-3.0, -0.2, 0.0, 0.5, 10.0}) {
    for (const double d : {1e-10, 1e-4, 0.3, 2.0}) {
      const double expected = std::asinh(y0 + d) - std::asinh(y0);
      EXPECT_NEAR(pc::asinh_difference(y0, y0 + d), expected, 1e-15 + 1e-9 * std::abs(expected));
    }
  }
  // Relative accuracy where the naive difference cancels.
  const double y1 = 1e3 + 1e-9;
  EXPECT_NEAR(pc::asinh_difference(1e3, y1) / ((y1 - 1e3) / std::sqrt(1.0 + 1e6)), 1.0, 1e-9);
}

TEST(Systems, KnifeEdgeSpotValues)
{
  const auto m = systems::make_knife_edge({0.0}, 0.5);
  EXPECT_EQ(m.coordinate_names, (std::vector<std::string>{"x", "y", "phi"}));
  EXPECT_EQ(m.constrained_slot, 1);
  const Vec q1 = vec3(0.4, 0.4 * std::tan(0.2), 0.4);
  EXPECT_NEAR(q1[1], 0.0810840, 1e-7);
  EXPECT_NEAR(m.mla.constraints_d.value(vec3(0, 0, 0), q1)[0], 0.0, 1e-15);
  Vec p(2);
  p << 1.0, 0.0;
  // A(0) = 1, so H = 1/2 (1 - x).
  EXPECT_DOUBLE_EQ(m.restricted_h(vec3(0, 0, 0), p), 0.5);
  const auto pert = systems::make_knife_edge({0.1}, 0.5);
  EXPECT_DOUBLE_EQ(pert.restricted_h(vec3(0, 0, 0), p), 0.5);
  EXPECT_NEAR(m.mla.lagrangian_d.value(vec3(0, 0, 0), q1),
              (0.16 + q1[1] * q1[1] + 0.16) / 1.0 + 0.5 * 0.4 / 4, 1e-15);
  EXPECT_NO_THROW(validate_at(m.system, vec3(0.3, -0.4, 0.2), vec3(1, std::tan(0.2), -0.4)));
  EXPECT_NO_THROW(validate_at(pert.system, vec3(0.3, -0.4, 0.2), vec3(0, 0, 0)));
}

TEST(Systems, KnifeEdgeForcesBalanceTheContinuousMultiplier)
{
  // The discrete forces are h/2 lambda A^T at the midpoint: they must be annihilated by the frame.
  for (const double eps : {0.0, 0.1}) {
    const auto m = systems::make_knife_edge({eps}, 0.5);
    nhint::testing::Sampler s(61);
    for (int i = 0; i < 10; ++i) {
      const Vec a = s.box(3, 0.5);
      const Vec b = a + s.box(3, 0.3);
      const Vec mid = 0.5 * (a + b);
      const Vec f = m.mla.forces_d.plus(a, b);
      EXPECT_LT((m.system.frame(mid).transpose() * f).norm(), 1e-14);
    }
  }
}

TEST(Systems, KnifeEdgeFrameSingularity)
{
  const auto m = systems::make_knife_edge({0.0}, 0.5);
  EXPECT_THROW(m.system.frame(vec3(0, 0, M_PI / 2)), FrameSingularity);
  Vec p(2);
  p << 1.0, 1.0;
  EXPECT_THROW(m.restricted_h(vec3(0, 0, M_PI / 2), p), FrameSingularity);
  const auto pert = systems::make_knife_edge({0.1}, 0.5);
  EXPECT_THROW(pert.system.frame(vec3(0, 0, std::acos(0.1))), FrameSingularity);
  EXPECT_NO_THROW(pert.system.frame(vec3(0, 0, std::acos(0.1) + 1e-3)));
}
