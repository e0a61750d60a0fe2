#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace nhint {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Chart-level roles. All live in R^n (FrameMomentum in R^{n-k}).
using ChartPoint = Vec;
using Velocity = Vec;
using Momentum = Vec;
using FrameMomentum = Vec;

/// Threshold on |A(q) v|_inf for a velocity to count as admissible.
inline constexpr double kConstrainedTolerance = 1e-9;

enum class Side { minus, plus };

/// Numerical knobs shared by the exact and discrete layers.
struct SolverSettings
{
  // RK4 substeps used to realize the time-h nonholonomic flow.
  int flow_substeps = 200;

  double shooting_tolerance = 1e-8;
  int shooting_max_iterations = 50;
  double shooting_fd_step = 1e-6;

  double newton_tolerance = 1e-12;
  int newton_max_iterations = 50;
  double newton_fd_step = 1e-7;

  // Composite Simpson intervals for integrals over [0, h]; rounded up to even.
  int quadrature_intervals = 200;
  // Perturbation used for finite-difference sensitivities of shooting solutions.
  double tangent_fd_step = 1e-5;
};

class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Dimension mismatch or violated precondition.
class ContractViolation : public Error
{
public:
  using Error::Error;
};

/// C(q) = A M^{-1} A^T is singular.
class CompatibilityError : public Error
{
public:
  using Error::Error;
};

class DivergenceError : public Error
{
public:
  DivergenceError(const std::string& what, int step)
    : Error(what), step_index(step)
  {
  }
  int step_index;
};

/// Shooting failed: the pair is not on the exact discrete constraint submanifold (or h is too large).
class NotOnSubmanifold : public Error
{
public:
  NotOnSubmanifold(const std::string& what, double r)
    : Error(what), residual(r)
  {
  }
  double residual;
};

class StepFailure : public Error
{
public:
  StepFailure(const std::string& what, int step, double r)
    : Error(what), step_index(step), residual(r)
  {
  }
  int step_index;
  double residual;
};

class SingularJacobian : public Error
{
public:
  using Error::Error;
};

/// A configuration pair violates the discrete constraint.
class OffConstraint : public Error
{
public:
  OffConstraint(const std::string& what, double r)
    : Error(what), residual(r)
  {
  }
  double residual;
};

class FrameSingularity : public Error
{
public:
  using Error::Error;
};

class InvalidTangent : public Error
{
public:
  using Error::Error;
};

class UsageError : public Error
{
public:
  using Error::Error;
};

} // namespace nhint
