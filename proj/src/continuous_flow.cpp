#include "nhint/continuous_flow.hpp"

#include <string>

#include "nhint/numerics.hpp"

namespace nhint {

namespace {

void require_constrained(const NonholonomicSystem& system, const State& state, const char* what)
{
  system.check_dimension(state.q, what);
  system.check_dimension(state.v, what);
  const double r = numerics::sup_norm(constraint_residual(system, state.q, state.v));
  if (!(r < kConstrainedTolerance)) {
    throw ContractViolation(std::string(what) + ": state violates the constraints (|Av| = " +
                            numerics::sci(r) + ")");
  }
}

} // namespace

namespace detail {

Multipliers multipliers_unchecked(const NonholonomicSystem& system, const State& state)
{
  if (system.corank() == 0) {
    return Vec(0);
  }
  const Mat a = system.constraint_matrix(state.q);
  const Mat a_rate = system.constraint_matrix_rate(state.q, state.v);
  const Vec f_free = system.lagrangian().free_force(state.q, state.v);
  const Vec minv_f = system.mass_matrix(state.q).partialPivLu().solve(f_free);
  const Vec rhs = -(a_rate * state.v + a * minv_f);
  return solve_compatibility(system, state.q, rhs);
}

StateDerivative vector_field_unchecked(const NonholonomicSystem& system, const State& state)
{
  Vec force = system.lagrangian().free_force(state.q, state.v);
  if (system.corank() > 0) {
    force += system.constraint_matrix(state.q).transpose() * multipliers_unchecked(system, state);
  }
  return {state.v, system.mass_matrix(state.q).partialPivLu().solve(force)};
}

State rk4_step(const NonholonomicSystem& system, const State& s, double step)
{
  const auto k1 = vector_field_unchecked(system, s);
  const State s2{s.q + 0.5 * step * k1.velocity, s.v + 0.5 * step * k1.acceleration};
  const auto k2 = vector_field_unchecked(system, s2);
  const State s3{s.q + 0.5 * step * k2.velocity, s.v + 0.5 * step * k2.acceleration};
  const auto k3 = vector_field_unchecked(system, s3);
  const State s4{s.q + step * k3.velocity, s.v + step * k3.acceleration};
  const auto k4 = vector_field_unchecked(system, s4);
  return {s.q + step / 6.0 * (k1.velocity + 2.0 * k2.velocity + 2.0 * k3.velocity + k4.velocity),
          s.v + step / 6.0 *
                    (k1.acceleration + 2.0 * k2.acceleration + 2.0 * k3.acceleration +
                     k4.acceleration)};
}

} // namespace detail

Multipliers multipliers(const NonholonomicSystem& system, const State& state)
{
  require_constrained(system, state, "multipliers");
  return detail::multipliers_unchecked(system, state);
}

Momentum nonholonomic_force(const NonholonomicSystem& system, const State& state)
{
  const Vec lambda = multipliers(system, state);
  if (system.corank() == 0) {
    return Vec::Zero(system.dimension());
  }
  return system.constraint_matrix(state.q).transpose() * lambda;
}

StateDerivative nonholonomic_vector_field(const NonholonomicSystem& system, const State& state)
{
  require_constrained(system, state, "nonholonomic_vector_field");
  return detail::vector_field_unchecked(system, state);
}

StateDerivative forced_vector_field(const MechanicalLagrangian& lagrangian, const ForceField& force,
                                    const State& state)
{
  Vec f = -lagrangian.potential_gradient(state.q);
  if (force) {
    f += force(state.q, state.v);
  }
  return {state.v, lagrangian.mass_matrix(state.q).partialPivLu().solve(f)};
}

ForceField extended_nonholonomic_force(const NonholonomicSystem& system)
{
  // Captures by value so the field outlives the caller's handle.
  return [system](const Vec& q, const Vec& v) -> Vec {
    Vec f = Vec::Zero(system.dimension());
    if (system.lagrangian().applied_force) {
      f += system.lagrangian().applied_force(q, v);
    }
    if (system.corank() > 0) {
      f += system.constraint_matrix(q).transpose() *
           detail::multipliers_unchecked(system, State{q, v});
    }
    return f;
  };
}

Trajectory integrate(const NonholonomicSystem& system, const State& state0, double step,
                     int n_steps)
{
  require_constrained(system, state0, "integrate");
  if (!(step > 0.0) || n_steps < 0) {
    throw ContractViolation("integrate: need step > 0 and n_steps >= 0");
  }
  Trajectory traj;
  traj.times.reserve(n_steps + 1);
  traj.states.reserve(n_steps + 1);
  traj.times.push_back(0.0);
  traj.states.push_back(state0);
  State s = state0;
  for (int i = 1; i <= n_steps; ++i) {
    s = detail::rk4_step(system, s, step);
    if (!s.q.allFinite() || !s.v.allFinite()) {
      throw DivergenceError("integrate: non-finite state at step " + std::to_string(i), i);
    }
    traj.times.push_back(i * step);
    traj.states.push_back(s);
  }
  return traj;
}

State flow(const NonholonomicSystem& system, const State& state0, double duration, int substeps)
{
  if (substeps < 1) {
    throw ContractViolation("flow: substeps must be >= 1");
  }
  const double step = duration / substeps;
  State s = state0;
  for (int i = 1; i <= substeps; ++i) {
    s = detail::rk4_step(system, s, step);
    if (!s.q.allFinite() || !s.v.allFinite()) {
      throw DivergenceError("flow: non-finite state at step " + std::to_string(i), i);
    }
  }
  return s;
}

} // namespace nhint
