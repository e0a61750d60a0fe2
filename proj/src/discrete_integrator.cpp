#include "nhint/discrete_integrator.hpp"

#include <cmath>
#include <string>

#include "nhint/numerics.hpp"

namespace nhint {

namespace {

constexpr double kSlotFdStep = 1e-6;
constexpr double kInitialPairTolerance = 1e-9;

} // namespace

Vec DiscreteLagrangian::slot1_derivative(const Vec& q0, const Vec& q1) const
{
  if (d1) {
    return d1(q0, q1);
  }
  return numerics::central_gradient([&](const Vec& x) { return value(x, q1); }, q0, kSlotFdStep);
}

Vec DiscreteLagrangian::slot2_derivative(const Vec& q0, const Vec& q1) const
{
  if (d2) {
    return d2(q0, q1);
  }
  return numerics::central_gradient([&](const Vec& x) { return value(q0, x); }, q1, kSlotFdStep);
}

Vec DiscreteForces::plus(const Vec& q0, const Vec& q1) const
{
  return f_plus ? f_plus(q0, q1) : Vec::Zero(q1.size());
}

Vec DiscreteForces::minus(const Vec& q0, const Vec& q1) const
{
  return f_minus ? f_minus(q0, q1) : Vec::Zero(q0.size());
}

Vec DiscreteConstraint::value(const Vec& q0, const Vec& q1) const
{
  if (count == 0 || !omega) {
    return Vec(0);
  }
  return omega(q0, q1);
}

namespace {

struct ResidualParts
{
  Vec residual;
  // Per-row magnitude of the balanced terms (0 for constraint rows).
  Vec scale;
};

ResidualParts residual_parts(const DiscretizationScheme& scheme, const Vec& q_prev,
                             const Vec& q_cur, const Vec& q_next)
{
  const int n = scheme.dimension;
  if (q_prev.size() != n || q_cur.size() != n || q_next.size() != n) {
    throw ContractViolation("mla_residual: dimension mismatch");
  }
  const int k = scheme.constraints_d.count;
  const Vec d2 = scheme.lagrangian_d.slot2_derivative(q_prev, q_cur);
  const Vec d1 = scheme.lagrangian_d.slot1_derivative(q_cur, q_next);
  const Vec fp = scheme.forces_d.plus(q_prev, q_cur);
  const Vec fm = scheme.forces_d.minus(q_cur, q_next);
  const Mat frame = scheme.frame(q_cur);
  ResidualParts parts{Vec(n), Vec::Zero(n)};
  parts.residual.head(n - k) = frame.transpose() * (d2 + d1 + fp + fm);
  parts.scale.head(n - k) = frame.cwiseAbs().transpose() *
                            (d2.cwiseAbs() + d1.cwiseAbs() + fp.cwiseAbs() + fm.cwiseAbs());
  if (k > 0) {
    parts.residual.tail(k) = scheme.constraints_d.value(q_cur, q_next);
  }
  return parts;
}

// Frame rows are compared against tolerance * (1 + magnitude of the balanced momenta),
// constraint rows against the absolute tolerance.
double scaled_norm(const ResidualParts& parts)
{
  return (parts.residual.cwiseAbs().array() / (1.0 + parts.scale.array())).maxCoeff();
}

} // namespace

Vec mla_residual(const DiscretizationScheme& scheme, const Vec& q_prev, const Vec& q_cur,
                 const Vec& q_next)
{
  return residual_parts(scheme, q_prev, q_cur, q_next).residual;
}

StepResult mla_step(const DiscretizationScheme& scheme, const Vec& q_prev, const Vec& q_cur,
                    const SolverSettings& settings)
{
  const int k = scheme.constraints_d.count;
  auto residual = [&](const Vec& q) { return mla_residual(scheme, q_prev, q_cur, q); };
  auto measure = [&](const Vec& q, Vec& r) {
    auto parts = residual_parts(scheme, q_prev, q_cur, q);
    r = parts.residual;
    return scaled_norm(parts);
  };
  Vec q = 2.0 * q_cur - q_prev;
  Vec r;
  double rn = measure(q, r);
  int it = 0;
  while (!(rn < settings.newton_tolerance)) {
    if (it == settings.newton_max_iterations || !std::isfinite(rn)) {
      throw StepFailure("mla_step: Newton did not converge (|r| = " + numerics::sci(rn) + ")", -1,
                        rn);
    }
    ++it;
    Mat jac = numerics::forward_jacobian(residual, q, r, settings.newton_fd_step);
    if (k > 0 && scheme.constraints_d.d_omega_q1) {
      jac.bottomRows(k) = scheme.constraints_d.d_omega_q1(q_cur, q);
    }
    const Eigen::PartialPivLU<Mat> lu(jac);
    if (!(lu.rcond() > 1e-14)) {
      throw SingularJacobian("mla_step: singular Newton Jacobian");
    }
    const Vec dq = lu.solve(-r);
    Vec q_new = q + dq;
    Vec r_new;
    double rn_new = measure(q_new, r_new);
    if (rn_new > rn) {
      q_new = q + 0.5 * dq;
      rn_new = measure(q_new, r_new);
    }
    if (numerics::sup_norm(q_new - q) == 0.0 && !(rn_new < settings.newton_tolerance)) {
      throw StepFailure("mla_step: Newton stagnated (|r| = " + numerics::sci(rn_new) + ")", -1,
                        rn_new);
    }
    q = std::move(q_new);
    r = std::move(r_new);
    rn = rn_new;
  }
  return {q, it, rn};
}

DiscreteTrajectory run(const DiscretizationScheme& scheme, const Vec& q0, const Vec& q1,
                       int n_steps, const SolverSettings& settings)
{
  if (n_steps < 0) {
    throw ContractViolation("run: n_steps must be >= 0");
  }
  const double w0 = numerics::sup_norm(scheme.constraints_d.value(q0, q1));
  if (!(w0 <= kInitialPairTolerance)) {
    throw OffConstraint("run: initial pair violates the discrete constraint", w0);
  }
  DiscreteTrajectory traj;
  traj.points.reserve(n_steps + 2);
  traj.points.push_back(q0);
  traj.points.push_back(q1);
  for (int k = 0; k < n_steps; ++k) {
    StepResult step;
    try {
      step = mla_step(scheme, traj.points[k], traj.points[k + 1], settings);
    } catch (const StepFailure& e) {
      throw StepFailure("run: step to point " + std::to_string(k + 2) + " failed: " + e.what(),
                        k + 2, e.residual);
    }
    traj.points.push_back(std::move(step.q_next));
    traj.newton_iterations.push_back(step.iterations);
    traj.residual_norms.push_back(step.residual);
  }
  return traj;
}

Vec forced_discrete_legendre(const DiscretizationScheme& scheme, const Vec& q0, const Vec& q1,
                             Side side)
{
  if (side == Side::plus) {
    return scheme.lagrangian_d.slot2_derivative(q0, q1) + scheme.forces_d.plus(q0, q1);
  }
  return -scheme.lagrangian_d.slot1_derivative(q0, q1) - scheme.forces_d.minus(q0, q1);
}

Vec projected_discrete_legendre(const DiscretizationScheme& scheme, const Vec& q0, const Vec& q1,
                                Side side)
{
  const double w = numerics::sup_norm(scheme.constraints_d.value(q0, q1));
  if (!(w <= kInitialPairTolerance)) {
    throw OffConstraint("projected_discrete_legendre: pair violates the discrete constraint", w);
  }
  const Vec& at = side == Side::plus ? q1 : q0;
  return scheme.frame(at).transpose() * forced_discrete_legendre(scheme, q0, q1, side);
}

std::vector<double> restricted_hamiltonian_series(const DiscretizationScheme& scheme,
                                                  const RestrictedHamiltonian& hamiltonian,
                                                  const DiscreteTrajectory& trajectory)
{
  std::vector<double> series;
  if (trajectory.points.size() < 2) {
    return series;
  }
  series.reserve(trajectory.points.size() - 1);
  for (std::size_t k = 0; k + 1 < trajectory.points.size(); ++k) {
    const Vec& qk = trajectory.points[k];
    series.push_back(hamiltonian(
      qk, projected_discrete_legendre(scheme, qk, trajectory.points[k + 1], Side::minus)));
  }
  return series;
}

} // namespace nhint
