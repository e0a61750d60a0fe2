#pragma once

#include <functional>

#include "nhint/types.hpp"

namespace nhint {

/// Regular mechanical Lagrangian L(q, v) = 1/2 v^T M(q) v - V(q), plus an optional applied force.
struct MechanicalLagrangian
{
  std::function<Mat(const Vec&)> mass_matrix;
  std::function<double(const Vec&)> potential;
  std::function<Vec(const Vec&)> potential_gradient;
  // Empty means no applied force.
  std::function<Vec(const Vec&, const Vec&)> applied_force;

  double value(const Vec& q, const Vec& v) const;
  /// -grad V(q) + applied_force(q, v)
  Vec free_force(const Vec& q, const Vec& v) const;
};

/// Velocity-linear constraints A(q) v = 0 together with a frame spanning their kernel.
struct DistributionSpec
{
  // q -> k x n matrix with rows mu^a_i(q)
  std::function<Mat(const Vec&)> constraint_matrix;
  // (q, v) -> directional derivative of A along v. Empty means central differences.
  std::function<Mat(const Vec&, const Vec&)> constraint_matrix_rate;
  // q -> n x (n-k) matrix whose columns span D_q
  std::function<Mat(const Vec&)> frame;
};

/// The continuous problem (Q, L, D) in a single chart.
class NonholonomicSystem
{
public:
  NonholonomicSystem(MechanicalLagrangian lagrangian, DistributionSpec distribution, int dimension,
                     int corank);

  int dimension() const { return dimension_; }
  int corank() const { return corank_; }
  int rank() const { return dimension_ - corank_; }

  const MechanicalLagrangian& lagrangian() const { return lagrangian_; }
  const DistributionSpec& distribution() const { return distribution_; }

  Mat mass_matrix(const Vec& q) const;
  Mat constraint_matrix(const Vec& q) const;
  /// Uses the analytic rate if supplied, else central differences with step 1e-6 (1 + |q|).
  Mat constraint_matrix_rate(const Vec& q, const Vec& v) const;
  Mat frame(const Vec& q) const;
  /// C(q) = A M^{-1} A^T
  Mat compatibility_matrix(const Vec& q) const;

  /// Throws ContractViolation when x does not have length n.
  void check_dimension(const Vec& x, const char* what) const;

private:
  MechanicalLagrangian lagrangian_;
  DistributionSpec distribution_;
  int dimension_;
  int corank_;
};

struct State
{
  ChartPoint q;
  Velocity v;
};

/// Phi^a = A(q) v
Vec constraint_residual(const NonholonomicSystem& system, const ChartPoint& q, const Velocity& v);

bool is_constrained(const NonholonomicSystem& system, const State& state,
                    double tolerance = kConstrainedTolerance);

/// p = M(q) v
Momentum legendre(const NonholonomicSystem& system, const ChartPoint& q, const Velocity& v);

/// E = 1/2 v^T M(q) v + V(q)
double energy(const NonholonomicSystem& system, const ChartPoint& q, const Velocity& v);

/// <p, e_a(q)> for each frame column.
FrameMomentum momentum_restrict(const NonholonomicSystem& system, const ChartPoint& q,
                                const Momentum& p);

/// Metric-orthogonal projection of v onto D_q.
Velocity project_velocity(const NonholonomicSystem& system, const ChartPoint& q, const Velocity& v);

/// Velocity with frame coordinates c: frame(q) c.
Velocity from_frame_coordinates(const NonholonomicSystem& system, const ChartPoint& q,
                                const Vec& coords);

/// Least-squares frame coordinates of v (exact when v lies in D_q).
Vec to_frame_coordinates(const NonholonomicSystem& system, const ChartPoint& q, const Velocity& v);

/// Solves C(q) x = rhs with partial pivoting; throws CompatibilityError when C is singular.
Vec solve_compatibility(const NonholonomicSystem& system, const ChartPoint& q, const Vec& rhs);

/// Checks the regularity, admissibility and consistency invariants of the system at (q, v).
/// Throws ContractViolation naming the first violated invariant.
void validate_at(const NonholonomicSystem& system, const ChartPoint& q, const Velocity& v);

} // namespace nhint
