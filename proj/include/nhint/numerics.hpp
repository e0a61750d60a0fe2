#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <functional>
#include <vector>

#include "nhint/types.hpp"

namespace nhint::numerics {

/// Short scientific rendering for error messages.
inline std::string sci(double x)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

inline double sup_norm(const Vec& v)
{
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

inline bool all_finite(const Vec& v)
{
  return v.allFinite();
}

/// Forward-difference Jacobian of f at x; column j uses step rel_step * (1 + |x|_inf).
inline Mat forward_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x,
                            const Vec& fx, double rel_step)
{
  const double step = rel_step * (1.0 + sup_norm(x));
  Mat jac(fx.size(), x.size());
  Vec xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    xp[j] = x[j] + step;
    jac.col(j) = (f(xp) - fx) / step;
    xp[j] = x[j];
  }
  return jac;
}

/// Central-difference Jacobian of f at x with step rel_step * (1 + |x|_inf).
inline Mat central_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x,
                            double rel_step)
{
  const double step = rel_step * (1.0 + sup_norm(x));
  Vec xp = x;
  Vec xm = x;
  Mat jac;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    xp[j] = x[j] + step;
    xm[j] = x[j] - step;
    const Vec col = (f(xp) - f(xm)) / (2.0 * step);
    if (j == 0) {
      jac.resize(col.size(), x.size());
    }
    jac.col(j) = col;
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return jac;
}

/// Central-difference gradient of a scalar function.
inline Vec central_gradient(const std::function<double(const Vec&)>& f, const Vec& x,
                            double rel_step)
{
  const double step = rel_step * (1.0 + sup_norm(x));
  Vec g(x.size());
  Vec xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    xp[j] = x[j] + step;
    const double fp = f(xp);
    xp[j] = x[j] - step;
    const double fm = f(xp);
    xp[j] = x[j];
    g[j] = (fp - fm) / (2.0 * step);
  }
  return g;
}

/// Composite Simpson rule on uniformly spaced samples; samples.size() - 1 must be even.
inline double simpson(const std::vector<double>& samples, double spacing)
{
  const std::size_t intervals = samples.size() - 1;
  if (samples.size() < 3 || intervals % 2 != 0) {
    throw ContractViolation("simpson: need an even number of intervals >= 2");
  }
  double acc = samples.front() + samples.back();
  for (std::size_t i = 1; i < intervals; ++i) {
    acc += (i % 2 == 1 ? 4.0 : 2.0) * samples[i];
  }
  return acc * spacing / 3.0;
}

inline int round_up_even(int n)
{
  return n % 2 == 0 ? n : n + 1;
}

} // namespace nhint::numerics
