#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "nhint/continuous_flow.hpp"

namespace nhint {

/// A pair of configurations h apart in time.
struct ConfigPair
{
  ChartPoint q0;
  ChartPoint q1;
  double h = 0.0;
};

/// Initial admissible velocity recovered from a configuration pair.
struct ShootingResult
{
  Velocity v0;
  double terminal_error = 0.0;
  int iterations = 0;
};

/// (q0, q1) -> vector whose zero set is a submanifold of Q x Q.
using PairFunction = std::function<Vec(const Vec&, const Vec&)>;

/// Nonholonomic exponential map: (q0, configuration reached after time h from v0 in D_{q0}).
ConfigPair exp_nh(const NonholonomicSystem& system, const ChartPoint& q0, const Velocity& v0,
                  double h, const SolverSettings& settings = {});

/// Exact retraction by Gauss-Newton shooting over frame coordinates of v0.
///
/// Throws NotOnSubmanifold when the terminal error cannot be brought below
/// settings.shooting_tolerance, which means the pair is not joinable by a
/// time-h nonholonomic trajectory near the initial guess.
ShootingResult retraction_shoot(const NonholonomicSystem& system, const ConfigPair& pair,
                                const std::optional<Velocity>& guess = std::nullopt,
                                const SolverSettings& settings = {});

/// Same iteration as retraction_shoot but never throws: returns the least-squares
/// best fit, with terminal_error holding the remaining |endpoint - q1|_inf.
ShootingResult retraction_least_squares(const NonholonomicSystem& system, const ConfigPair& pair,
                                        const std::optional<Velocity>& guess = std::nullopt,
                                        const SolverSettings& settings = {});

/// Completes q1 so that (q0, q1) is joinable: the components flagged in `fixed` are kept,
/// the others are taken from the endpoint of the matching trajectory.
/// `fixed` must have exactly n - k true entries.
ConfigPair complete_exact_pair(const NonholonomicSystem& system, const ChartPoint& q0,
                               const ChartPoint& q1, const std::vector<bool>& fixed, double h,
                               const SolverSettings& settings = {});

/// Exact discrete flow (q0, q1) -> (q1, q2).
ConfigPair exact_discrete_flow(const NonholonomicSystem& system, const ConfigPair& pair,
                               const SolverSettings& settings = {});

/// Frame momenta of the matching trajectory at t = 0 (minus) or t = h (plus).
FrameMomentum exact_discrete_legendre(const NonholonomicSystem& system, const ConfigPair& pair,
                                      Side side, const SolverSettings& settings = {});

/// Integral of L along the matching trajectory, composite Simpson with `intervals`
/// subintervals (rounded up to even).
double exact_discrete_lagrangian(const NonholonomicSystem& system, const ConfigPair& pair,
                                 int intervals, const SolverSettings& settings = {});

struct OneFormIdentity
{
  double dl = 0.0;    // differential of the exact discrete Lagrangian along (X0, X1)
  double beta = 0.0;  // integral of <F_nh, X01(t)>
  double sigma = 0.0; // <p(h), X1> - <p(0), X0>
  double lhs = 0.0;   // dl + beta
  double rhs = 0.0;   // sigma

  double relative_gap() const;
};

/// Evaluates both sides of d l + beta = sigma along a tangent (X0, X1) of the exact
/// submanifold at `pair`.
///
/// When `defining` is given, tangency is checked as |d defining(X0, X1)|_inf <= 1e-6;
/// otherwise as the least-squares distance of the perturbed pair relative to the
/// perturbation size. Throws InvalidTangent on failure.
OneFormIdentity exact_one_form_identity(const NonholonomicSystem& system, const ConfigPair& pair,
                                        const Vec& x0, const Vec& x1,
                                        const SolverSettings& settings = {},
                                        const PairFunction& defining = {});

/// States of the matching trajectory at intervals + 1 uniform nodes on [0, h].
std::vector<State> sample_exact_curve(const NonholonomicSystem& system, const ChartPoint& q0,
                                      const Velocity& v0, double h, int intervals,
                                      const SolverSettings& settings = {});

} // namespace nhint
