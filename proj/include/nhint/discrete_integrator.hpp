#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nhint/types.hpp"

namespace nhint {

using PairScalar = std::function<double(const Vec&, const Vec&)>;
using PairCovector = std::function<Vec(const Vec&, const Vec&)>;
using PairMatrix = std::function<Mat(const Vec&, const Vec&)>;

/// L_d(q0, q1) with optional analytic slot derivatives (central differences otherwise).
struct DiscreteLagrangian
{
  PairScalar value;
  PairCovector d1;
  PairCovector d2;

  Vec slot1_derivative(const Vec& q0, const Vec& q1) const;
  Vec slot2_derivative(const Vec& q0, const Vec& q1) const;
};

/// F_d^+ (covector at q1) and F_d^- (covector at q0). Empty callables mean zero.
struct DiscreteForces
{
  PairCovector f_plus;
  PairCovector f_minus;

  Vec plus(const Vec& q0, const Vec& q1) const;
  Vec minus(const Vec& q0, const Vec& q1) const;
};

/// Discrete constraint space {omega(q0, q1) = 0} with k component functions.
struct DiscreteConstraint
{
  PairCovector omega;
  // d omega / d q1 (k x n). Empty means forward differences.
  PairMatrix d_omega_q1;
  int count = 0;

  Vec value(const Vec& q0, const Vec& q1) const;
};

/// One MLA / DLA / DEL configuration.
struct DiscretizationScheme
{
  std::string name;
  int dimension = 0;
  DiscreteLagrangian lagrangian_d;
  DiscreteForces forces_d;
  DiscreteConstraint constraints_d;
  // q -> n x (n - k) frame of the distribution (identity for unconstrained DEL).
  std::function<Mat(const Vec&)> frame;
};

struct DiscreteTrajectory
{
  std::vector<Vec> points;
  // Per computed step (points[k + 2]).
  std::vector<int> newton_iterations;
  std::vector<double> residual_norms;
};

/// (n - k) frame projections of D2 L_d(prev, cur) + D1 L_d(cur, next) + F^+(prev, cur)
/// + F^-(cur, next) at q_cur, followed by the k entries omega(cur, next).
Vec mla_residual(const DiscretizationScheme& scheme, const Vec& q_prev, const Vec& q_cur,
                 const Vec& q_next);

struct StepResult
{
  Vec q_next;
  int iterations = 0;
  double residual = 0.0;
};

/// Solves mla_residual(prev, cur, .) = 0 by Newton with a forward-difference Jacobian,
/// starting from 2 q_cur - q_prev. Throws StepFailure or SingularJacobian.
StepResult mla_step(const DiscretizationScheme& scheme, const Vec& q_prev, const Vec& q_cur,
                    const SolverSettings& settings = {});

/// N steps from (q0, q1): n_steps + 2 points. Throws OffConstraint when omega(q0, q1) != 0
/// and StepFailure (with the index of the failing point) when a step does not converge.
DiscreteTrajectory run(const DiscretizationScheme& scheme, const Vec& q0, const Vec& q1,
                       int n_steps, const SolverSettings& settings = {});

/// F^{f+} = D2 L_d + F_d^+ at q1, F^{f-} = -D1 L_d - F_d^- at q0.
Vec forced_discrete_legendre(const DiscretizationScheme& scheme, const Vec& q0, const Vec& q1,
                             Side side);

/// Frame projection of forced_discrete_legendre at the matching endpoint.
/// Throws OffConstraint unless omega(q0, q1) vanishes to 1e-9.
Vec projected_discrete_legendre(const DiscretizationScheme& scheme, const Vec& q0, const Vec& q1,
                                Side side);

using RestrictedHamiltonian = std::function<double(const Vec& q, const Vec& frame_momentum)>;

/// H(q_k, F^- l_d(q_k, q_{k+1})) for every k with a successor.
std::vector<double> restricted_hamiltonian_series(const DiscretizationScheme& scheme,
                                                  const RestrictedHamiltonian& hamiltonian,
                                                  const DiscreteTrajectory& trajectory);

} // namespace nhint
