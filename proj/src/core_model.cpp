#include "nhint/core_model.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "nhint/numerics.hpp"

namespace nhint {

namespace {

constexpr double kRateFdStep = 1e-6;
constexpr double kSingularRcond = 1e-14;

} // namespace

double MechanicalLagrangian::value(const Vec& q, const Vec& v) const
{
  return 0.5 * v.dot(mass_matrix(q) * v) - potential(q);
}

Vec MechanicalLagrangian::free_force(const Vec& q, const Vec& v) const
{
  Vec f = -potential_gradient(q);
  if (applied_force) {
    f += applied_force(q, v);
  }
  return f;
}

NonholonomicSystem::NonholonomicSystem(MechanicalLagrangian lagrangian,
                                       DistributionSpec distribution, int dimension, int corank)
  : lagrangian_(std::move(lagrangian)),
    distribution_(std::move(distribution)),
    dimension_(dimension),
    corank_(corank)
{
  if (dimension_ < 1 || corank_ < 0 || corank_ >= dimension_) {
    throw ContractViolation("NonholonomicSystem: need n >= 1 and 0 <= k < n");
  }
  if (!lagrangian_.mass_matrix || !lagrangian_.potential || !lagrangian_.potential_gradient) {
    throw ContractViolation("NonholonomicSystem: Lagrangian callables must be set");
  }
  if (!distribution_.constraint_matrix || !distribution_.frame) {
    throw ContractViolation("NonholonomicSystem: constraint matrix and frame must be set");
  }
}

void NonholonomicSystem::check_dimension(const Vec& x, const char* what) const
{
  if (x.size() != dimension_) {
    throw ContractViolation(std::string(what) + ": expected length " + std::to_string(dimension_) +
                            ", got " + std::to_string(x.size()));
  }
}

Mat NonholonomicSystem::mass_matrix(const Vec& q) const
{
  return lagrangian_.mass_matrix(q);
}

Mat NonholonomicSystem::constraint_matrix(const Vec& q) const
{
  if (corank_ == 0) {
    return Mat(0, dimension_);
  }
  return distribution_.constraint_matrix(q);
}

Mat NonholonomicSystem::constraint_matrix_rate(const Vec& q, const Vec& v) const
{
  if (corank_ == 0) {
    return Mat(0, dimension_);
  }
  if (distribution_.constraint_matrix_rate) {
    return distribution_.constraint_matrix_rate(q, v);
  }
  const double step = kRateFdStep * (1.0 + numerics::sup_norm(q));
  return (distribution_.constraint_matrix(q + step * v) -
          distribution_.constraint_matrix(q - step * v)) /
         (2.0 * step);
}

Mat NonholonomicSystem::frame(const Vec& q) const
{
  return distribution_.frame(q);
}

Mat NonholonomicSystem::compatibility_matrix(const Vec& q) const
{
  const Mat a = constraint_matrix(q);
  const Mat minv_at = mass_matrix(q).partialPivLu().solve(a.transpose());
  return a * minv_at;
}

Vec constraint_residual(const NonholonomicSystem& system, const ChartPoint& q, const Velocity& v)
{
  system.check_dimension(q, "constraint_residual(q)");
  system.check_dimension(v, "constraint_residual(v)");
  return system.constraint_matrix(q) * v;
}

bool is_constrained(const NonholonomicSystem& system, const State& state, double tolerance)
{
  return numerics::sup_norm(constraint_residual(system, state.q, state.v)) < tolerance;
}

Momentum legendre(const NonholonomicSystem& system, const ChartPoint& q, const Velocity& v)
{
  return system.mass_matrix(q) * v;
}

double energy(const NonholonomicSystem& system, const ChartPoint& q, const Velocity& v)
{
  return 0.5 * v.dot(system.mass_matrix(q) * v) + system.lagrangian().potential(q);
}

FrameMomentum momentum_restrict(const NonholonomicSystem& system, const ChartPoint& q,
                                const Momentum& p)
{
  return system.frame(q).transpose() * p;
}

Vec solve_compatibility(const NonholonomicSystem& system, const ChartPoint& q, const Vec& rhs)
{
  if (system.corank() == 0) {
    return Vec(0);
  }
  const Mat c = system.compatibility_matrix(q);
  const Eigen::PartialPivLU<Mat> lu(c);
  const double scale = c.cwiseAbs().maxCoeff();
  if (!(scale > 0.0) || lu.rcond() < kSingularRcond) {
    throw CompatibilityError("compatibility matrix A M^-1 A^T is singular");
  }
  return lu.solve(rhs);
}

Velocity project_velocity(const NonholonomicSystem& system, const ChartPoint& q, const Velocity& v)
{
  system.check_dimension(v, "project_velocity(v)");
  if (system.corank() == 0) {
    return v;
  }
  const Mat a = system.constraint_matrix(q);
  const Vec mu = solve_compatibility(system, q, a * v);
  return v - system.mass_matrix(q).partialPivLu().solve(a.transpose() * mu);
}

Velocity from_frame_coordinates(const NonholonomicSystem& system, const ChartPoint& q,
                                const Vec& coords)
{
  return system.frame(q) * coords;
}

Vec to_frame_coordinates(const NonholonomicSystem& system, const ChartPoint& q, const Velocity& v)
{
  return system.frame(q).colPivHouseholderQr().solve(v);
}

void validate_at(const NonholonomicSystem& system, const ChartPoint& q, const Velocity& v)
{
  system.check_dimension(q, "validate_at(q)");
  system.check_dimension(v, "validate_at(v)");
  const int n = system.dimension();
  const int k = system.corank();

  if (!q.allFinite() || !v.allFinite()) {
    throw ContractViolation("non-finite chart point or velocity");
  }

  const Mat m = system.mass_matrix(q);
  if (m.rows() != n || m.cols() != n) {
    throw ContractViolation("mass matrix has wrong shape");
  }
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + m.cwiseAbs().maxCoeff())) {
    throw ContractViolation("mass matrix is not symmetric");
  }
  if (Eigen::LLT<Mat>(m).info() != Eigen::Success) {
    throw ContractViolation("mass matrix is not positive definite");
  }

  const auto& lag = system.lagrangian();
  const Vec grad = lag.potential_gradient(q);
  const Vec grad_fd = numerics::central_gradient(lag.potential, q, 1e-6);
  if ((grad - grad_fd).cwiseAbs().maxCoeff() > 1e-5 * (1.0 + grad.cwiseAbs().maxCoeff())) {
    throw ContractViolation("potential_gradient disagrees with finite differences of potential");
  }

  const Mat frame = system.frame(q);
  if (frame.rows() != n || frame.cols() != n - k) {
    throw ContractViolation("frame has wrong shape");
  }
  if (Eigen::ColPivHouseholderQR<Mat>(frame).rank() != n - k) {
    throw ContractViolation("frame columns are linearly dependent");
  }
  if (k == 0) {
    return;
  }

  const Mat a = system.constraint_matrix(q);
  if (a.rows() != k || a.cols() != n) {
    throw ContractViolation("constraint matrix has wrong shape");
  }
  if (Eigen::ColPivHouseholderQR<Mat>(a).rank() != k) {
    throw ContractViolation("constraint matrix is rank deficient (admissibility)");
  }
  if ((a * frame).cwiseAbs().maxCoeff() > 1e-12) {
    throw ContractViolation("frame columns do not lie in the distribution");
  }

  if (system.distribution().constraint_matrix_rate) {
    const Mat rate = system.distribution().constraint_matrix_rate(q, v);
    const double step = 1e-6 * (1.0 + numerics::sup_norm(q));
    const Mat rate_fd = (system.distribution().constraint_matrix(q + step * v) -
                         system.distribution().constraint_matrix(q - step * v)) /
                        (2.0 * step);
    if ((rate - rate_fd).cwiseAbs().maxCoeff() > 1e-5 * (1.0 + rate.cwiseAbs().maxCoeff())) {
      throw ContractViolation("constraint_matrix_rate disagrees with finite differences");
    }
  }

  // Throws CompatibilityError if C(q) is singular.
  solve_compatibility(system, q, Vec::Zero(k));
}

} // namespace nhint
