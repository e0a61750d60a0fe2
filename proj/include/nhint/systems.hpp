#pragma once

#include <string>
#include <vector>

#include "nhint/continuous_flow.hpp"
#include "nhint/discrete_integrator.hpp"

namespace nhint::systems {

/// A continuous system with its two discretizations and the monitored restricted Hamiltonian.
struct ExampleModel
{
  std::string name;
  NonholonomicSystem system;
  // Modified Lagrange-d'Alembert scheme (discrete constraint + discrete forces).
  DiscretizationScheme mla;
  // Same L_d and discrete constraint, no forces.
  DiscretizationScheme dla;
  RestrictedHamiltonian restricted_h;
  std::vector<std::string> coordinate_names;
  // Coordinate solved from the discrete constraint when seeding an initial pair.
  int constrained_slot = -1;
};

/// Nonholonomic particle in R^3, coordinates (x, y, z), constraint zdot = y xdot.
/// Frame e1 = d/dx + y d/dz, e2 = d/dy.
ExampleModel make_particle(double h);

struct KnifeEdgeParams
{
  double epsilon = 0.0;
};

/// Knife edge on R^2 x S^1, coordinates (x, y, phi), L = 1/2 |v|^2 + x/2,
/// constraint sin(phi) xdot - (cos(phi) - epsilon) ydot = 0.
/// Frame e1 = d/dx + sin(phi)/(cos(phi) - epsilon) d/dy, e2 = d/dphi.
/// Frame, restricted Hamiltonian and discrete forces throw FrameSingularity
/// where |cos(phi) - epsilon| <= 1e-6.
ExampleModel make_knife_edge(const KnifeEdgeParams& params, double h);

/// Closed forms for the nonholonomic particle.
namespace particle {

/// Closed-form flow; state0 must satisfy zdot0 = y0 xdot0.
State closed_flow(const State& state0, double t);

/// Closed-form exact retraction of a pair joinable in time h.
Velocity retraction_closed(const ChartPoint& q0, const ChartPoint& q1, double h);

/// Defining function of the exact discrete constraint submanifold.
double mu_d(const ChartPoint& q0, const ChartPoint& q1, double h);

/// Gradient of mu_d with respect to (q0, q1), stacked as a 6-vector.
Vec mu_d_gradient(const ChartPoint& q0, const ChartPoint& q1, double h);

struct Update
{
  double x2;
  double y2;
};

/// Closed-form solution of the MLA equations for (x2, y2); z2 follows from the discrete constraint.
Update mla_update(const ChartPoint& q0, const ChartPoint& q1, double h);

/// z1 solving the discrete constraint z1 = z0 + (y1 + y0)/2 (x1 - x0).
double discrete_z1(const ChartPoint& q0, double x1, double y1);

/// asinh(y1) - asinh(y0) without cancellation for nearby arguments.
double asinh_difference(double y0, double y1);

} // namespace particle

} // namespace nhint::systems
