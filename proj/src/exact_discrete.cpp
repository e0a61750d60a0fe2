#include "nhint/exact_discrete.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nhint/numerics.hpp"

namespace nhint {

namespace {

constexpr double kStagnationRatio = 0.5;
constexpr double kTangencyTolerance = 1e-6;
constexpr double kFallbackTangencyTolerance = 1e-3;

std::vector<int> all_components(int n)
{
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) {
    idx[i] = i;
  }
  return idx;
}

Vec select(const Vec& v, const std::vector<int>& idx)
{
  Vec out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = v[idx[i]];
  }
  return out;
}

struct ShootOutcome
{
  Vec coords;
  Velocity v0;
  ChartPoint endpoint;
  double residual = 0.0;
  int iterations = 0;
};

// Gauss-Newton on the frame coordinates c of v0 = frame(q0) c, driving the selected
// components of the time-h endpoint towards those of q1.
ShootOutcome shoot(const NonholonomicSystem& system, const ChartPoint& q0, const ChartPoint& q1,
                   double h, const std::vector<int>& components,
                   const std::optional<Velocity>& guess, const SolverSettings& settings)
{
  system.check_dimension(q0, "shoot(q0)");
  system.check_dimension(q1, "shoot(q1)");
  if (!(h > 0.0)) {
    throw ContractViolation("shoot: h must be positive");
  }
  const Mat frame0 = system.frame(q0);

  Vec c;
  if (guess) {
    system.check_dimension(*guess, "shoot(guess)");
    c = to_frame_coordinates(system, q0, *guess);
  } else {
    c = to_frame_coordinates(system, q0, project_velocity(system, q0, (q1 - q0) / h));
  }

  const Vec target = select(q1, components);
  auto endpoint = [&](const Vec& coords) -> ChartPoint {
    return flow(system, State{q0, frame0 * coords}, h, settings.flow_substeps).q;
  };
  auto residual_of = [&](const Vec& coords) -> Vec { return select(endpoint(coords), components) - target; };

  const double floor = 1e-13 * (1.0 + numerics::sup_norm(q1));
  Vec r = residual_of(c);
  double rn = numerics::sup_norm(r);
  int it = 0;
  int stalled = 0;
  while (it < settings.shooting_max_iterations && rn > floor) {
    ++it;
    const Mat jac = numerics::central_jacobian(residual_of, c, settings.shooting_fd_step);
    const Vec dc = jac.colPivHouseholderQr().solve(-r);
    if (!dc.allFinite()) {
      break;
    }
    Vec c_new = c + dc;
    Vec r_new = residual_of(c_new);
    double rn_new = numerics::sup_norm(r_new);
    // Halve the step while the residual grows.
    for (int damp = 0; damp < 8 && !(rn_new <= rn); ++damp) {
      c_new = c + std::ldexp(1.0, -(damp + 1)) * dc;
      r_new = residual_of(c_new);
      rn_new = numerics::sup_norm(r_new);
    }
    if (!(rn_new <= rn)) {
      break;
    }
    const double step_size = numerics::sup_norm(c_new - c);
    const bool stagnant = rn_new > kStagnationRatio * rn;
    c = std::move(c_new);
    r = std::move(r_new);
    rn = rn_new;
    if (step_size <= 1e-15 * (1.0 + numerics::sup_norm(c))) {
      break;
    }
    // Least-squares minimum off the submanifold: the residual stops shrinking.
    stalled = stagnant ? stalled + 1 : 0;
    if (stalled >= 3) {
      break;
    }
  }

  ShootOutcome out;
  out.coords = c;
  out.v0 = frame0 * c;
  out.endpoint = endpoint(c);
  out.residual = numerics::sup_norm(out.endpoint - q1);
  if (components.size() != static_cast<std::size_t>(system.dimension())) {
    out.residual = rn;
  }
  out.iterations = it;
  return out;
}

} // namespace

ConfigPair exp_nh(const NonholonomicSystem& system, const ChartPoint& q0, const Velocity& v0,
                  double h, const SolverSettings& settings)
{
  if (!(h > 0.0)) {
    throw ContractViolation("exp_nh: h must be positive");
  }
  const State s0{q0, v0};
  if (!is_constrained(system, s0)) {
    throw ContractViolation("exp_nh: v0 is not in the distribution");
  }
  return {q0, flow(system, s0, h, settings.flow_substeps).q, h};
}

ShootingResult retraction_least_squares(const NonholonomicSystem& system, const ConfigPair& pair,
                                        const std::optional<Velocity>& guess,
                                        const SolverSettings& settings)
{
  const auto out = shoot(system, pair.q0, pair.q1, pair.h, all_components(system.dimension()),
                         guess, settings);
  return {out.v0, out.residual, out.iterations};
}

ShootingResult retraction_shoot(const NonholonomicSystem& system, const ConfigPair& pair,
                                const std::optional<Velocity>& guess,
                                const SolverSettings& settings)
{
  auto result = retraction_least_squares(system, pair, guess, settings);
  if (!(result.terminal_error < settings.shooting_tolerance)) {
    throw NotOnSubmanifold("retraction_shoot: terminal error " +
                               numerics::sci(result.terminal_error) +
                               " after " + std::to_string(result.iterations) + " iterations",
                           result.terminal_error);
  }
  return result;
}

ConfigPair complete_exact_pair(const NonholonomicSystem& system, const ChartPoint& q0,
                               const ChartPoint& q1, const std::vector<bool>& fixed, double h,
                               const SolverSettings& settings)
{
  system.check_dimension(q1, "complete_exact_pair(q1)");
  if (fixed.size() != static_cast<std::size_t>(system.dimension())) {
    throw ContractViolation("complete_exact_pair: mask has wrong length");
  }
  std::vector<int> idx;
  for (int i = 0; i < system.dimension(); ++i) {
    if (fixed[i]) {
      idx.push_back(i);
    }
  }
  if (static_cast<int>(idx.size()) != system.rank()) {
    throw ContractViolation("complete_exact_pair: need exactly n - k fixed components");
  }
  const auto out = shoot(system, q0, q1, h, idx, std::nullopt, settings);
  if (!(out.residual < settings.shooting_tolerance)) {
    throw NotOnSubmanifold("complete_exact_pair: shooting did not converge", out.residual);
  }
  ChartPoint completed = out.endpoint;
  for (int i : idx) {
    completed[i] = q1[i];
  }
  return {q0, completed, h};
}

ConfigPair exact_discrete_flow(const NonholonomicSystem& system, const ConfigPair& pair,
                               const SolverSettings& settings)
{
  const auto shot = retraction_shoot(system, pair, std::nullopt, settings);
  const State end = flow(system, State{pair.q0, shot.v0}, pair.h, settings.flow_substeps);
  const Velocity v1 = project_velocity(system, pair.q1, end.v);
  const State next = flow(system, State{pair.q1, v1}, pair.h, settings.flow_substeps);
  return {pair.q1, next.q, pair.h};
}

FrameMomentum exact_discrete_legendre(const NonholonomicSystem& system, const ConfigPair& pair,
                                      Side side, const SolverSettings& settings)
{
  const auto shot = retraction_shoot(system, pair, std::nullopt, settings);
  if (side == Side::minus) {
    return momentum_restrict(system, pair.q0, legendre(system, pair.q0, shot.v0));
  }
  const State end = flow(system, State{pair.q0, shot.v0}, pair.h, settings.flow_substeps);
  return momentum_restrict(system, pair.q1, legendre(system, pair.q1, end.v));
}

std::vector<State> sample_exact_curve(const NonholonomicSystem& system, const ChartPoint& q0,
                                      const Velocity& v0, double h, int intervals,
                                      const SolverSettings& settings)
{
  if (intervals < 1) {
    throw ContractViolation("sample_exact_curve: need at least one interval");
  }
  const int per_interval =
    std::max(1, (settings.flow_substeps + intervals - 1) / intervals);
  const double dt = h / (static_cast<double>(intervals) * per_interval);
  std::vector<State> nodes;
  nodes.reserve(intervals + 1);
  State s{q0, v0};
  nodes.push_back(s);
  for (int i = 0; i < intervals; ++i) {
    for (int j = 0; j < per_interval; ++j) {
      s = detail::rk4_step(system, s, dt);
    }
    if (!s.q.allFinite() || !s.v.allFinite()) {
      throw DivergenceError("sample_exact_curve: non-finite state", i + 1);
    }
    nodes.push_back(s);
  }
  return nodes;
}

namespace {

double lagrangian_along(const NonholonomicSystem& system, const std::vector<State>& nodes, double h)
{
  std::vector<double> values;
  values.reserve(nodes.size());
  for (const auto& s : nodes) {
    values.push_back(system.lagrangian().value(s.q, s.v));
  }
  return numerics::simpson(values, h / static_cast<double>(nodes.size() - 1));
}

} // namespace

double exact_discrete_lagrangian(const NonholonomicSystem& system, const ConfigPair& pair,
                                 int intervals, const SolverSettings& settings)
{
  if (intervals < 2) {
    throw ContractViolation("exact_discrete_lagrangian: need at least 2 quadrature intervals");
  }
  const int even = numerics::round_up_even(intervals);
  const auto shot = retraction_shoot(system, pair, std::nullopt, settings);
  return lagrangian_along(system, sample_exact_curve(system, pair.q0, shot.v0, pair.h, even, settings),
                          pair.h);
}

double OneFormIdentity::relative_gap() const
{
  return std::abs(lhs - rhs) / (1.0 + std::abs(rhs));
}

OneFormIdentity exact_one_form_identity(const NonholonomicSystem& system, const ConfigPair& pair,
                                        const Vec& x0, const Vec& x1,
                                        const SolverSettings& settings,
                                        const PairFunction& defining)
{
  system.check_dimension(x0, "exact_one_form_identity(X0)");
  system.check_dimension(x1, "exact_one_form_identity(X1)");
  const double s = settings.tangent_fd_step;
  const int intervals = numerics::round_up_even(std::max(2, settings.quadrature_intervals));

  if (defining) {
    const Vec dg = (defining(pair.q0 + 1e-6 * x0, pair.q1 + 1e-6 * x1) -
                    defining(pair.q0 - 1e-6 * x0, pair.q1 - 1e-6 * x1)) /
                   2e-6;
    if (numerics::sup_norm(dg) > kTangencyTolerance) {
      throw InvalidTangent("exact_one_form_identity: tangent leaves the submanifold (|dg| = " +
                           numerics::sci(numerics::sup_norm(dg)) + ")");
    }
  }

  const auto base = retraction_shoot(system, pair, std::nullopt, settings);
  const ConfigPair plus{pair.q0 + s * x0, pair.q1 + s * x1, pair.h};
  const ConfigPair minus{pair.q0 - s * x0, pair.q1 - s * x1, pair.h};
  const auto shot_plus = retraction_least_squares(system, plus, base.v0, settings);
  const auto shot_minus = retraction_least_squares(system, minus, base.v0, settings);

  if (!defining) {
    const double scale = s * (1.0 + std::max(numerics::sup_norm(x0), numerics::sup_norm(x1)));
    const double distance = std::max(shot_plus.terminal_error, shot_minus.terminal_error);
    if (distance > kFallbackTangencyTolerance * scale) {
      throw InvalidTangent("exact_one_form_identity: tangent leaves the submanifold");
    }
  }

  const auto nodes0 = sample_exact_curve(system, pair.q0, base.v0, pair.h, intervals, settings);
  const auto nodes_p = sample_exact_curve(system, plus.q0, shot_plus.v0, pair.h, intervals, settings);
  const auto nodes_m = sample_exact_curve(system, minus.q0, shot_minus.v0, pair.h, intervals, settings);

  OneFormIdentity out;
  out.dl = (lagrangian_along(system, nodes_p, pair.h) - lagrangian_along(system, nodes_m, pair.h)) /
           (2.0 * s);

  // Total non-conservative force: multiplier force plus any applied force.
  const ForceField force = extended_nonholonomic_force(system);
  std::vector<double> work;
  work.reserve(nodes0.size());
  for (std::size_t i = 0; i < nodes0.size(); ++i) {
    const Vec variation = (nodes_p[i].q - nodes_m[i].q) / (2.0 * s);
    work.push_back(force(nodes0[i].q, nodes0[i].v).dot(variation));
  }
  out.beta = numerics::simpson(work, pair.h / intervals);

  const State& end = nodes0.back();
  out.sigma = legendre(system, pair.q1, end.v).dot(x1) -
              legendre(system, pair.q0, base.v0).dot(x0);
  out.lhs = out.dl + out.beta;
  out.rhs = out.sigma;
  return out;
}

} // namespace nhint
