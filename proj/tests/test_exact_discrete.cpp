#include <cmath>

#include <gtest/gtest.h>

#include "nhint/exact_discrete.hpp"
#include "nhint/systems.hpp"
#include "test_support.hpp"

using namespace nhint;
using nhint::testing::vec3;
namespace pc = nhint::systems::particle;

namespace {

const NonholonomicSystem& particle()
{
  static const auto model = systems::make_particle(0.5);
  return model.system;
}

ConfigPair closed_pair(const Vec& q0, const Vec& v0, double h)
{
  return {q0, pc::closed_flow({q0, v0}, h).q, h};
}

} // namespace

TEST(ExactDiscrete, ExpExample)
{
  const auto pair = exp_nh(particle(), vec3(0, 0, 0), vec3(1, 1, 0), 0.5);
  EXPECT_NEAR(pair.q1[0], 0.4812118, 1e-7);
  EXPECT_NEAR(pair.q1[1], 0.5, 1e-12);
  EXPECT_NEAR(pair.q1[2], 0.1180340, 1e-7);
  EXPECT_EQ(pair.q0, vec3(0, 0, 0));
}

TEST(ExactDiscrete, ExpSmallStepIsFirstOrder)
{
  const Vec q0 = vec3(0.2, -0.3, 0.1);
  const Vec v0 = vec3(1, 0.5, -0.3);
  for (double h : {1e-2, 1e-3}) {
    const auto pair = exp_nh(particle(), q0, v0, h);
    EXPECT_LT((pair.q1 - q0 - h * v0).norm(), 2.0 * h * h);
  }
}

TEST(ExactDiscrete, ExpAtRestStaysPut)
{
  const auto pair = exp_nh(particle(), vec3(1, 2, 3), vec3(0, 0, 0), 0.5);
  EXPECT_EQ(pair.q1, vec3(1, 2, 3));
}

TEST(ExactDiscrete, ExpRejectsInadmissibleVelocity)
{
  EXPECT_THROW(exp_nh(particle(), vec3(0, 0, 0), vec3(0, 0, 1), 0.5), ContractViolation);
}

TEST(ExactDiscrete, RetractionInvertsExp)
{
  const auto pair = exp_nh(particle(), vec3(0, 0, 0), vec3(1, 1, 0), 0.5);
  const auto shot = retraction_shoot(particle(), pair);
  EXPECT_LT((shot.v0 - vec3(1, 1, 0)).lpNorm<Eigen::Infinity>(), 1e-8);
  EXPECT_LT(shot.terminal_error, 1e-8);
}

TEST(ExactDiscrete, RetractionSelfConsistency)
{
  nhint::testing::Sampler s(17);
  for (double h : {0.1, 0.5}) {
    for (int i = 0; i < 15; ++i) {
      const Vec q0 = s.box(3, 1.0);
      const Vec v0 = s.admissible(particle(), q0, 2.0);
      const auto pair = exp_nh(particle(), q0, v0, h);
      const auto shot = retraction_shoot(particle(), pair);
      EXPECT_LT((shot.v0 - v0).lpNorm<Eigen::Infinity>(), 1e-8);
      const auto again = exp_nh(particle(), q0, shot.v0, h);
      EXPECT_LT((again.q1 - pair.q1).lpNorm<Eigen::Infinity>(), 1e-8);
    }
  }
}

TEST(ExactDiscrete, OffSubmanifoldPairIsRejected)
{
  auto pair = exp_nh(particle(), vec3(0, 0, 0), vec3(1, 1, 0), 0.5);
  pair.q1[2] += 0.1;
  EXPECT_THROW(retraction_shoot(particle(), pair), NotOnSubmanifold);
  const auto ls = retraction_least_squares(particle(), pair);
  EXPECT_GT(ls.terminal_error, 1e-3);
}

TEST(ExactDiscrete, CompletePairFillsConstrainedSlot)
{
  const auto target = closed_pair(vec3(0, 0, 0), vec3(1, 1, 0), 0.5);
  Vec guess = target.q1;
  guess[2] = 0.0;
  const auto pair = complete_exact_pair(particle(), target.q0, guess, {true, true, false}, 0.5);
  EXPECT_NEAR(pair.q1[2], target.q1[2], 1e-9);
  EXPECT_EQ(pair.q1[0], target.q1[0]);
  EXPECT_THROW(complete_exact_pair(particle(), target.q0, guess, {true, false, false}, 0.5),
               ContractViolation);
}

TEST(ExactDiscrete, FlowMatchesClosedForm)
{
  const State s0{vec3(0, 0, 0), vec3(1, 1, 0)};
  ConfigPair pair = closed_pair(s0.q, s0.v, 0.5);
  const auto next = exact_discrete_flow(particle(), pair);
  EXPECT_LT((next.q0 - pc::closed_flow(s0, 0.5).q).lpNorm<Eigen::Infinity>(), 1e-15);
  EXPECT_LT((next.q1 - pc::closed_flow(s0, 1.0).q).lpNorm<Eigen::Infinity>(), 1e-7);
  for (int k = 2; k <= 10; ++k) {
    pair = exact_discrete_flow(particle(), pair);
    EXPECT_LT((pair.q0 - pc::closed_flow(s0, 0.5 * (k - 1)).q).lpNorm<Eigen::Infinity>(), 1e-6);
  }
}

TEST(ExactDiscrete, LegendreSidesMatchMomenta)
{
  const Vec v0 = vec3(1, 1, 0);
  const auto pair = closed_pair(vec3(0, 0, 0), v0, 0.5);
  const Vec minus = exact_discrete_legendre(particle(), pair, Side::minus);
  EXPECT_LT((minus - momentum_restrict(particle(), pair.q0, v0)).norm(), 1e-8);
  const auto end = pc::closed_flow({pair.q0, v0}, 0.5);
  const Vec plus = exact_discrete_legendre(particle(), pair, Side::plus);
  EXPECT_LT((plus - momentum_restrict(particle(), end.q, end.v)).norm(), 1e-8);
}

TEST(ExactDiscrete, MomentumMatchingAlongFlow)
{
  nhint::testing::Sampler s(23);
  for (int i = 0; i < 5; ++i) {
    const Vec q0 = s.box(3, 1.0);
    const auto pair = exp_nh(particle(), q0, s.admissible(particle(), q0, 2.0), 0.5);
    const auto next = exact_discrete_flow(particle(), pair);
    const Vec gap = exact_discrete_legendre(particle(), pair, Side::plus) -
                    exact_discrete_legendre(particle(), next, Side::minus);
    EXPECT_LT(gap.lpNorm<Eigen::Infinity>(), 1e-8);
  }
}

TEST(ExactDiscrete, DiscreteLagrangianExamples)
{
  const auto pair = closed_pair(vec3(0, 0, 0), vec3(1, 1, 0), 0.5);
  EXPECT_NEAR(exact_discrete_lagrangian(particle(), pair, 200), 0.5, 1e-9);
  const ConfigPair rest{vec3(1, 1, 1), vec3(1, 1, 1), 0.5};
  EXPECT_NEAR(exact_discrete_lagrangian(particle(), rest, 10), 0.0, 1e-15);
  // Odd interval counts are rounded up.
  EXPECT_NEAR(exact_discrete_lagrangian(particle(), pair, 199), 0.5, 1e-9);
  EXPECT_THROW(exact_discrete_lagrangian(particle(), pair, 0), ContractViolation);
}

TEST(ExactDiscrete, DiscreteLagrangianOnKnifeWithPotential)
{
  // Free fall in x: x(t) = x0 + v t + t^2 / 4, L = 1/2 v^2 + x/2; integral evaluated by hand.
  const auto knife = systems::make_knife_edge({0.0}, 0.5);
  const ConfigPair pair{vec3(0, 0, 0), vec3(0.5 * 0.5 * 0.5 / 2, 0, 0), 0.5};
  // Rest start: x(t) = t^2/4, xdot = t/2, L = t^2/8 + t^2/8 = t^2/4, integral h^3/12.
  EXPECT_NEAR(exact_discrete_lagrangian(knife.system, pair, 100), std::pow(0.5, 3) / 12.0, 1e-9);
}

TEST(ExactDiscrete, OneFormIdentityAlongTangents)
{
  const auto pair = closed_pair(vec3(0, 0, 0), vec3(1, 1, 0), 0.5);
  const PairFunction mu = [](const Vec& a, const Vec& b) { return Vec::Constant(1, pc::mu_d(a, b, 0.5)); };
  const Vec g = pc::mu_d_gradient(pair.q0, pair.q1, 0.5);
  const Vec zero = Vec::Zero(3);
  for (int slot : {0, 1}) {
    Vec x1 = Vec::Zero(3);
    x1[slot] = 1.0;
    x1[2] = -g[3 + slot] / g[5];
    const auto id = exact_one_form_identity(particle(), pair, zero, x1, {}, mu);
    EXPECT_LT(id.relative_gap(), 1e-4) << "slot " << slot;
    EXPECT_NEAR(id.lhs, id.dl + id.beta, 1e-15);
    EXPECT_EQ(id.rhs, id.sigma);
  }
  const auto z = exact_one_form_identity(particle(), pair, zero, zero, {}, mu);
  EXPECT_NEAR(z.lhs, 0.0, 1e-12);
  EXPECT_NEAR(z.rhs, 0.0, 1e-12);
}

TEST(ExactDiscrete, OneFormIdentityWithoutDefiningFunction)
{
  const auto pair = closed_pair(vec3(0.1, -0.2, 0.3), vec3(0.5, 0.8, -0.1), 0.5);
  const Vec g = pc::mu_d_gradient(pair.q0, pair.q1, 0.5);
  Vec x1 = vec3(0, 1, 0);
  x1[2] = -g[4] / g[5];
  const auto id = exact_one_form_identity(particle(), pair, Vec::Zero(3), x1);
  EXPECT_LT(id.relative_gap(), 1e-4);
}

TEST(ExactDiscrete, NonTangentDirectionIsRejected)
{
  const auto pair = closed_pair(vec3(0, 0, 0), vec3(1, 1, 0), 0.5);
  const PairFunction mu = [](const Vec& a, const Vec& b) { return Vec::Constant(1, pc::mu_d(a, b, 0.5)); };
  EXPECT_THROW(exact_one_form_identity(particle(), pair, Vec::Zero(3), vec3(0, 0, 1), {}, mu),
               InvalidTangent);
}

TEST(ExactDiscrete, SampleCurveEndpoints)
{
  const auto states = sample_exact_curve(particle(), vec3(0, 0, 0), vec3(1, 1, 0), 0.5, 10);
  ASSERT_EQ(states.size(), 11U);
  EXPECT_EQ(states.front().q, vec3(0, 0, 0));
  EXPECT_LT((states.back().q - pc::closed_flow({vec3(0, 0, 0), vec3(1, 1, 0)}, 0.5).q).norm(), 1e-10);
}
