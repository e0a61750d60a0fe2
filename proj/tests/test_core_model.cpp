#include <gtest/gtest.h>

#include "nhint/continuous_flow.hpp"
#include "nhint/systems.hpp"
#include "test_support.hpp"

using namespace nhint;
using nhint::testing::vec3;

namespace {

const NonholonomicSystem& particle()
{
  static const auto model = systems::make_particle(0.5);
  return model.system;
}

const NonholonomicSystem& knife()
{
  static const auto model = systems::make_knife_edge({0.0}, 0.5);
  return model.system;
}

// KKT oracle: minimise 1/2 (w - v)^T M (w - v) subject to A w = 0.
Vec kkt_projection(const NonholonomicSystem& sys, const Vec& q, const Vec& v)
{
  const Mat m = sys.mass_matrix(q);
  const Mat a = sys.constraint_matrix(q);
  const auto n = m.rows();
  const auto k = a.rows();
  Mat kkt = Mat::Zero(n + k, n + k);
  kkt.topLeftCorner(n, n) = m;
  kkt.topRightCorner(n, k) = a.transpose();
  kkt.bottomLeftCorner(k, n) = a;
  Vec rhs = Vec::Zero(n + k);
  rhs.head(n) = m * v;
  return kkt.fullPivLu().solve(rhs).head(n);
}

} // namespace

TEST(CoreModel, ConstraintResidualExamples)
{
  EXPECT_NEAR(constraint_residual(particle(), vec3(0, 0, 0), vec3(1, 1, 0))[0], 0.0, 1e-15);
  EXPECT_NEAR(constraint_residual(particle(), vec3(0, 1, 0), vec3(2, 3, 2))[0], 0.0, 1e-15);
  EXPECT_NEAR(constraint_residual(particle(), vec3(0, 0, 0), vec3(1, 0, 1))[0], 1.0, 1e-15);
  EXPECT_TRUE(is_constrained(particle(), {vec3(0, 1, 0), vec3(2, 3, 2)}));
  EXPECT_FALSE(is_constrained(particle(), {vec3(0, 0, 0), vec3(1, 0, 1)}));
}

TEST(CoreModel, LegendreExamples)
{
  const auto id = nhint::testing::unconstrained(Mat::Identity(3, 3));
  EXPECT_EQ(legendre(id, vec3(0, 0, 0), vec3(1, 2, 3)), vec3(1, 2, 3));
  const auto twice = nhint::testing::unconstrained(2.0 * Mat::Identity(3, 3));
  EXPECT_EQ(legendre(twice, vec3(0, 0, 0), vec3(1, 0, 0)), vec3(2, 0, 0));
  EXPECT_EQ(legendre(knife(), vec3(0, 0, 0), vec3(0.3, 0.1, 0.5)), vec3(0.3, 0.1, 0.5));
}

TEST(CoreModel, EnergyExamples)
{
  EXPECT_DOUBLE_EQ(energy(particle(), vec3(0, 0, 0), vec3(1, 1, 0)), 1.0);
  EXPECT_DOUBLE_EQ(energy(particle(), vec3(0.3, -1, 2), vec3(0, 0, 0)), 0.0);
  EXPECT_DOUBLE_EQ(energy(knife(), vec3(1, 0, 0), vec3(0, 0, 0)), -0.5);
}

TEST(CoreModel, MomentumRestrictExamples)
{
  const Vec p = momentum_restrict(particle(), vec3(0, 3, 0), vec3(1, 0, 2));
  EXPECT_DOUBLE_EQ(p[0], 7.0);
  EXPECT_DOUBLE_EQ(p[1], 0.0);
  EXPECT_EQ(momentum_restrict(particle(), vec3(1, 2, 3), Vec::Zero(3)), Vec::Zero(2));
  const Vec q = momentum_restrict(particle(), vec3(5, 0, -1), vec3(0.7, -0.2, 9));
  EXPECT_DOUBLE_EQ(q[0], 0.7);
  EXPECT_DOUBLE_EQ(q[1], -0.2);
}

TEST(CoreModel, ProjectVelocityMatchesKktOracle)
{
  // At y = 0 the constraint is zdot = 0, so (0, 0, 1) projects to zero.
  EXPECT_LT((project_velocity(particle(), vec3(0, 0, 0), vec3(0, 0, 1))).norm(), 1e-15);
  // At y = 1 the projection is (0.5, 0, 0.5).
  EXPECT_LT((project_velocity(particle(), vec3(0, 1, 0), vec3(0, 0, 1)) - vec3(0.5, 0, 0.5)).norm(),
            1e-14);

  nhint::testing::Sampler s(11);
  for (int i = 0; i < 50; ++i) {
    const Vec q = s.box(3, 2.0);
    const Vec v = s.box(3, 3.0);
    for (const auto* sys : {&particle(), &knife()}) {
      const Vec pv = project_velocity(*sys, q, v);
      EXPECT_LT((pv - kkt_projection(*sys, q, v)).norm(), 1e-12);
      EXPECT_LT(constraint_residual(*sys, q, pv).norm(), 1e-12);
      // Idempotent.
      EXPECT_LT((project_velocity(*sys, q, pv) - pv).norm(), 1e-12);
    }
  }
}

TEST(CoreModel, AdmissibleVelocityUnchangedAndLinear)
{
  nhint::testing::Sampler s(5);
  for (int i = 0; i < 20; ++i) {
    const Vec q = s.box(3, 1.0);
    const Vec v = s.admissible(particle(), q, 2.0);
    EXPECT_LT((project_velocity(particle(), q, v) - v).norm(), 1e-13);
    const Vec a = s.box(3, 1.0);
    const Vec b = s.box(3, 1.0);
    const Vec lhs = project_velocity(particle(), q, 2.0 * a - 3.0 * b);
    const Vec rhs = 2.0 * project_velocity(particle(), q, a) - 3.0 * project_velocity(particle(), q, b);
    EXPECT_LT((lhs - rhs).norm(), 1e-13);
  }
}

TEST(CoreModel, FrameCoordinatesRoundTrip)
{
  nhint::testing::Sampler s(3);
  for (int i = 0; i < 20; ++i) {
    const Vec q = s.box(3, 0.6);
    const Vec c = s.box(2, 1.0);
    const Vec v = from_frame_coordinates(knife(), q, c);
    EXPECT_LT(constraint_residual(knife(), q, v).norm(), 1e-13);
    EXPECT_LT((to_frame_coordinates(knife(), q, v) - c).norm(), 1e-12);
  }
}

TEST(CoreModel, ValidateAtAcceptsExampleSystems)
{
  EXPECT_NO_THROW(validate_at(particle(), vec3(0.1, 0.2, 0.3), vec3(1, 1, 0.2)));
  EXPECT_NO_THROW(validate_at(knife(), vec3(0.1, 0.2, 0.3), vec3(1, 0.5, 0.2)));
}

TEST(CoreModel, ValidateAtRejectsInconsistentFrame)
{
  MechanicalLagrangian lag = particle().lagrangian();
  DistributionSpec dist = particle().distribution();
  // e1 = d/dx without the y d/dz term is not annihilated by A.
  dist.frame = [](const Vec&) -> Mat {
    Mat e = Mat::Zero(3, 2);
    e(0, 0) = 1.0;
    e(1, 1) = 1.0;
    return e;
  };
  const NonholonomicSystem bad(lag, dist, 3, 1);
  EXPECT_THROW(validate_at(bad, vec3(0, 1, 0), vec3(1, 0, 1)), ContractViolation);
}

TEST(CoreModel, ValidateAtRejectsWrongGradient)
{
  MechanicalLagrangian lag = particle().lagrangian();
  lag.potential_gradient = [](const Vec&) -> Vec { return Vec::Ones(3); };
  const NonholonomicSystem bad(lag, particle().distribution(), 3, 1);
  EXPECT_THROW(validate_at(bad, vec3(0, 0, 0), vec3(0, 0, 0)), ContractViolation);
}

TEST(CoreModel, DimensionMismatchIsContractViolation)
{
  EXPECT_THROW(constraint_residual(particle(), Vec::Zero(2), Vec::Zero(3)), ContractViolation);
}

TEST(CoreModel, SingularCompatibilityThrows)
{
  MechanicalLagrangian lag = particle().lagrangian();
  DistributionSpec dist;
  // Two identical constraint rows: C = A A^T is singular.
  dist.constraint_matrix = [](const Vec&) -> Mat {
    Mat a(2, 3);
    a << 0, 0, 1, 0, 0, 1;
    return a;
  };
  dist.frame = [](const Vec&) -> Mat { return Mat::Identity(3, 2); };
  const NonholonomicSystem bad(lag, dist, 3, 2);
  EXPECT_THROW(solve_compatibility(bad, vec3(0, 0, 0), Vec::Ones(2)), CompatibilityError);
}

TEST(CoreModel, ConstraintRateFallsBackToFiniteDifferences)
{
  DistributionSpec dist = knife().distribution();
  dist.constraint_matrix_rate = nullptr;
  const NonholonomicSystem fd(knife().lagrangian(), dist, 3, 1);
  nhint::testing::Sampler s(9);
  for (int i = 0; i < 10; ++i) {
    const Vec q = s.box(3, 1.0);
    const Vec v = s.box(3, 1.0);
    EXPECT_LT((fd.constraint_matrix_rate(q, v) - knife().constraint_matrix_rate(q, v)).norm(), 1e-8);
  }
}
