#include "nhint/systems.hpp"

#include <cmath>
#include <string>

#include "nhint/numerics.hpp"

namespace nhint::systems {

namespace {

constexpr double kFrameGuard = 1e-6;
constexpr double kCoincidentY = 1e-8;

double sqrt1p_sq(double y)
{
  return std::sqrt(1.0 + y * y);
}

// sqrt(1 + y1^2) - sqrt(1 + y0^2)
double sqrt1p_sq_difference(double y0, double y1)
{
  return (y1 - y0) * (y1 + y0) / (sqrt1p_sq(y1) + sqrt1p_sq(y0));
}

// (asinh(y1) - asinh(y0)) / (y1 - y0), continuous at y1 = y0
double asinh_difference_quotient(double y0, double y1)
{
  const double d = y1 - y0;
  if (d == 0.0) {
    return 1.0 / sqrt1p_sq(y0);
  }
  return particle::asinh_difference(y0, y1) / d;
}

DiscreteLagrangian quadratic_kinetic_ld(double h)
{
  DiscreteLagrangian ld;
  ld.value = [h](const Vec& q0, const Vec& q1) { return (q1 - q0).squaredNorm() / (2.0 * h); };
  ld.d1 = [h](const Vec& q0, const Vec& q1) -> Vec { return -(q1 - q0) / h; };
  ld.d2 = [h](const Vec& q0, const Vec& q1) -> Vec { return (q1 - q0) / h; };
  return ld;
}

} // namespace

namespace particle {

double asinh_difference(double y0, double y1)
{
  if (y0 + y1 < 0.0) {
    return -asinh_difference(-y0, -y1);
  }
  const double s0 = sqrt1p_sq(y0);
  const double s1 = sqrt1p_sq(y1);
  // y0 + s0 without cancellation when y0 < 0
  const double base = y0 >= 0.0 ? y0 + s0 : 1.0 / (s0 - y0);
  const double d = y1 - y0;
  return std::log1p(d * (1.0 + (y1 + y0) / (s1 + s0)) / base);
}

State closed_flow(const State& state0, double t)
{
  const double x0 = state0.q[0];
  const double y0 = state0.q[1];
  const double z0 = state0.q[2];
  const double xd0 = state0.v[0];
  const double yd0 = state0.v[1];
  if (yd0 == 0.0) {
    Vec q(3);
    q << xd0 * t + x0, y0, y0 * xd0 * t + z0;
    Vec v(3);
    v << xd0, 0.0, y0 * xd0;
    return {q, v};
  }
  const double y = yd0 * t + y0;
  const double s0 = sqrt1p_sq(y0);
  const double s = sqrt1p_sq(y);
  // (xd0 / yd0) s0 (asinh y - asinh y0), rewritten through the difference quotient
  const double x = x0 + xd0 * t * s0 * asinh_difference_quotient(y0, y);
  const double z = z0 + xd0 * t * s0 * (y + y0) / (s + s0);
  const double xd = xd0 * s0 / s;
  Vec q(3);
  q << x, y, z;
  Vec v(3);
  v << xd, yd0, y * xd;
  return {q, v};
}

Velocity retraction_closed(const ChartPoint& q0, const ChartPoint& q1, double h)
{
  const double dx = q1[0] - q0[0];
  const double dy = q1[1] - q0[1];
  const double y0 = q0[1];
  Vec v(3);
  if (std::abs(dy) < kCoincidentY) {
    v << dx / h, 0.0, y0 * dx / h;
    return v;
  }
  const double xd = dx * dy / (h * sqrt1p_sq(y0) * asinh_difference(y0, q1[1]));
  v << xd, dy / h, y0 * xd;
  return v;
}

double mu_d(const ChartPoint& q0, const ChartPoint& q1, double h)
{
  const double dx = q1[0] - q0[0];
  const double dy = q1[1] - q0[1];
  const double dz = q1[2] - q0[2];
  if (std::abs(dy) < kCoincidentY) {
    return dz / h - q0[1] * dx / h;
  }
  return dz / h -
         dx * sqrt1p_sq_difference(q0[1], q1[1]) / (h * asinh_difference(q0[1], q1[1]));
}

Vec mu_d_gradient(const ChartPoint& q0, const ChartPoint& q1, double h)
{
  const double y0 = q0[1];
  const double y1 = q1[1];
  const double dx = q1[0] - q0[0];
  Vec g(6);
  if (std::abs(y1 - y0) < 1e-3) {
    Vec pair(6);
    pair << q0, q1;
    return numerics::central_gradient(
      [h](const Vec& p) { return mu_d(p.head(3), p.tail(3), h); }, pair, 1e-6);
  }
  const double num = sqrt1p_sq_difference(y0, y1);
  const double den = asinh_difference(y0, y1);
  const double ratio = num / den;
  const double d_ratio_y1 = (y1 * den - num) / (sqrt1p_sq(y1) * den * den);
  const double d_ratio_y0 = (num - y0 * den) / (sqrt1p_sq(y0) * den * den);
  g << ratio / h, -dx * d_ratio_y0 / h, -1.0 / h, -ratio / h, -dx * d_ratio_y1 / h, 1.0 / h;
  return g;
}

Update mla_update(const ChartPoint& q0, const ChartPoint& q1, double /*h*/)
{
  const double x0 = q0[0];
  const double y0 = q0[1];
  const double x1 = q1[0];
  const double y1 = q1[1];
  const double dy2 = (y1 - y0) * (y1 - y0);
  const double num = 1.0 + 0.5 * y1 * (y1 + y0) + dy2 / (4.0 + (y1 + y0) * (y1 + y0));
  const double den =
    1.0 + 0.5 * y1 * (3.0 * y1 - y0) + dy2 / (4.0 + (3.0 * y1 - y0) * (3.0 * y1 - y0));
  return {x1 + (x1 - x0) * num / den, 2.0 * y1 - y0};
}

double discrete_z1(const ChartPoint& q0, double x1, double y1)
{
  return q0[2] + 0.5 * (y1 + q0[1]) * (x1 - q0[0]);
}

} // namespace particle

ExampleModel make_particle(double h)
{
  if (!(h > 0.0)) {
    throw ContractViolation("make_particle: h must be positive");
  }
  MechanicalLagrangian lag;
  lag.mass_matrix = [](const Vec&) -> Mat { return Mat::Identity(3, 3); };
  lag.potential = [](const Vec&) { return 0.0; };
  lag.potential_gradient = [](const Vec&) -> Vec { return Vec::Zero(3); };

  DistributionSpec dist;
  dist.constraint_matrix = [](const Vec& q) -> Mat {
    Mat a(1, 3);
    a << -q[1], 0.0, 1.0;
    return a;
  };
  dist.constraint_matrix_rate = [](const Vec&, const Vec& v) -> Mat {
    Mat a(1, 3);
    a << -v[1], 0.0, 0.0;
    return a;
  };
  auto frame = [](const Vec& q) -> Mat {
    Mat e(3, 2);
    e << 1.0, 0.0, 0.0, 1.0, q[1], 0.0;
    return e;
  };
  dist.frame = frame;

  DiscreteConstraint omega;
  omega.count = 1;
  omega.omega = [](const Vec& q0, const Vec& q1) -> Vec {
    Vec w(1);
    w[0] = q1[2] - q0[2] - 0.5 * (q1[1] + q0[1]) * (q1[0] - q0[0]);
    return w;
  };
  omega.d_omega_q1 = [](const Vec& q0, const Vec& q1) -> Mat {
    Mat d(1, 3);
    d << -0.5 * (q1[1] + q0[1]), -0.5 * (q1[0] - q0[0]), 1.0;
    return d;
  };

  // Midpoint multiplier (h/2) lambda(q_mid, dq/h) along the constraint one-form at y_mid.
  auto coefficient = [h](const Vec& q0, const Vec& q1) {
    const double sum_y = q1[1] + q0[1];
    return 2.0 / h * (q1[0] - q0[0]) * (q1[1] - q0[1]) / (4.0 + sum_y * sum_y);
  };
  DiscreteForces forces;
  forces.f_plus = [coefficient](const Vec& q0, const Vec& q1) -> Vec {
    const double c = coefficient(q0, q1);
    Vec f(3);
    f << -0.5 * (q1[1] + q0[1]) * c, 0.0, c;
    return f;
  };
  forces.f_minus = forces.f_plus;

  ExampleModel model{"particle", NonholonomicSystem(lag, dist, 3, 1), {}, {}, {}, {"x", "y", "z"}, 2};
  model.mla = {"mla", 3, quadratic_kinetic_ld(h), forces, omega, frame};
  model.dla = {"dla", 3, quadratic_kinetic_ld(h), {}, omega, frame};
  model.restricted_h = [](const Vec& q, const Vec& p) {
    return 0.5 * (p[0] * p[0] / (1.0 + q[1] * q[1]) + p[1] * p[1]);
  };
  return model;
}

ExampleModel make_knife_edge(const KnifeEdgeParams& params, double h)
{
  if (!(h > 0.0)) {
    throw ContractViolation("make_knife_edge: h must be positive");
  }
  if (!(params.epsilon >= 0.0)) {
    throw ContractViolation("make_knife_edge: epsilon must be >= 0");
  }
  const double eps = params.epsilon;
  auto shifted_cos = [eps](double phi) {
    const double c = std::cos(phi) - eps;
    if (!(std::abs(c) > kFrameGuard)) {
      throw FrameSingularity("knife edge: cos(phi) - epsilon vanishes at phi = " +
                             std::to_string(phi));
    }
    return c;
  };

  MechanicalLagrangian lag;
  lag.mass_matrix = [](const Vec&) -> Mat { return Mat::Identity(3, 3); };
  lag.potential = [](const Vec& q) { return -0.5 * q[0]; };
  lag.potential_gradient = [](const Vec&) -> Vec {
    Vec g(3);
    g << -0.5, 0.0, 0.0;
    return g;
  };

  DistributionSpec dist;
  dist.constraint_matrix = [eps](const Vec& q) -> Mat {
    Mat a(1, 3);
    a << std::sin(q[2]), -(std::cos(q[2]) - eps), 0.0;
    return a;
  };
  dist.constraint_matrix_rate = [](const Vec& q, const Vec& v) -> Mat {
    Mat a(1, 3);
    a << std::cos(q[2]) * v[2], std::sin(q[2]) * v[2], 0.0;
    return a;
  };
  auto frame = [shifted_cos](const Vec& q) -> Mat {
    Mat e(3, 2);
    e << 1.0, 0.0, std::sin(q[2]) / shifted_cos(q[2]), 0.0, 0.0, 1.0;
    return e;
  };
  dist.frame = frame;

  DiscreteLagrangian ld;
  ld.value = [h](const Vec& q0, const Vec& q1) {
    return (q1 - q0).squaredNorm() / (2.0 * h) + h * (q1[0] + q0[0]) / 4.0;
  };
  ld.d1 = [h](const Vec& q0, const Vec& q1) -> Vec {
    Vec g = -(q1 - q0) / h;
    g[0] += h / 4.0;
    return g;
  };
  ld.d2 = [h](const Vec& q0, const Vec& q1) -> Vec {
    Vec g = (q1 - q0) / h;
    g[0] += h / 4.0;
    return g;
  };

  DiscreteConstraint omega;
  omega.count = 1;
  omega.omega = [h, eps](const Vec& q0, const Vec& q1) -> Vec {
    const double mid = 0.5 * (q1[2] + q0[2]);
    Vec w(1);
    w[0] = (std::sin(mid) * (q1[0] - q0[0]) - (std::cos(mid) - eps) * (q1[1] - q0[1])) / h;
    return w;
  };
  omega.d_omega_q1 = [h, eps](const Vec& q0, const Vec& q1) -> Mat {
    const double mid = 0.5 * (q1[2] + q0[2]);
    const double s = std::sin(mid);
    const double c = std::cos(mid);
    Mat d(1, 3);
    d << s / h, -(c - eps) / h, 0.5 * (c * (q1[0] - q0[0]) + s * (q1[1] - q0[1])) / h;
    return d;
  };

  // (h/2) lambda_mid (mu_x, mu_y, 0) with lambda_mid the multiplier at the midpoint
  // state (q_mid, dq/h) and mu the constraint one-form at phi_mid.
  auto force = [h, eps](const Vec& q0, const Vec& q1) -> Vec {
    const double mid = 0.5 * (q1[2] + q0[2]);
    const double s = std::sin(mid);
    const double c = std::cos(mid);
    const double dphi = q1[2] - q0[2];
    const double compat = s * s + (c - eps) * (c - eps);
    const double lambda =
      (-dphi / (h * h) * ((q1[0] - q0[0]) * c + (q1[1] - q0[1]) * s) - 0.5 * s) / compat;
    Vec f(3);
    f << s, -(c - eps), 0.0;
    return 0.5 * h * lambda * f;
  };
  DiscreteForces forces{force, force};

  const std::string name = eps == 0.0 ? "knife_edge" : "knife_edge_perturbed";
  ExampleModel model{name, NonholonomicSystem(lag, dist, 3, 1), {}, {}, {}, {"x", "y", "phi"}, 1};
  model.mla = {"mla", 3, ld, forces, omega, frame};
  model.dla = {"dla", 3, ld, {}, omega, frame};
  model.restricted_h = [shifted_cos](const Vec& q, const Vec& p) {
    const double t = std::sin(q[2]) / shifted_cos(q[2]);
    const double a = 1.0 + t * t;
    return 0.5 * (p[0] * p[0] / a + p[1] * p[1] - q[0]);
  };
  return model;
}

} // namespace nhint::systems
