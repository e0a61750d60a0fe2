#pragma once

#include <functional>
#include <vector>

#include "nhint/core_model.hpp"

namespace nhint {

using Multipliers = Vec;

/// (q, v) -> covector at q
using ForceField = std::function<Vec(const Vec&, const Vec&)>;

struct StateDerivative
{
  Velocity velocity;
  Vec acceleration;
};

/// Time-uniform samples of a continuous trajectory.
struct Trajectory
{
  std::vector<double> times;
  std::vector<State> states;
};

/// Lagrange multipliers solving C(q) lambda = -(Adot(q,v) v + A M^{-1} F_free).
/// Requires a constrained state.
Multipliers multipliers(const NonholonomicSystem& system, const State& state);

/// F_nh = A(q)^T lambda. Requires a constrained state.
Momentum nonholonomic_force(const NonholonomicSystem& system, const State& state);

/// Gamma_nh at a constrained state: (v, M^{-1}(F_free + A^T lambda)).
StateDerivative nonholonomic_vector_field(const NonholonomicSystem& system, const State& state);

/// Forced Euler-Lagrange field (v, M^{-1}(-grad V + F(q, v))).
StateDerivative forced_vector_field(const MechanicalLagrangian& lagrangian, const ForceField& force,
                                    const State& state);

/// Extension of F_nh off the distribution: the same formula A^T lambda(q, v) evaluated for any v.
ForceField extended_nonholonomic_force(const NonholonomicSystem& system);

/// Classical RK4 with fixed step; returns n_steps + 1 samples.
/// Throws DivergenceError carrying the step index when a state becomes non-finite.
Trajectory integrate(const NonholonomicSystem& system, const State& state0, double step,
                     int n_steps);

/// End state of the flow after `duration` using `substeps` RK4 steps.
State flow(const NonholonomicSystem& system, const State& state0, double duration, int substeps);

namespace detail {

// Same formulas as above without the constrained-state precondition; used inside RK4 stages.
Multipliers multipliers_unchecked(const NonholonomicSystem& system, const State& state);
StateDerivative vector_field_unchecked(const NonholonomicSystem& system, const State& state);
State rk4_step(const NonholonomicSystem& system, const State& s, double step);

} // namespace detail

} // namespace nhint
