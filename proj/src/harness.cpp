#include "nhint/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <random>
#include <sstream>

#include "nhint/csv.hpp"
#include "nhint/numerics.hpp"

namespace nhint::harness {

namespace {

constexpr double kReferenceSubstepDivisor = 500.0;
constexpr double kOrderErrorFloor = 1e-12;

std::string trim(const std::string& s)
{
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) {
    return {};
  }
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& text)
{
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) {
      throw std::invalid_argument(text);
    }
    return v;
  } catch (const std::exception&) {
    throw UsageError("invalid number for " + key + ": '" + text + "'");
  }
}

// Unconstrained 1-DOF fixture with the midpoint discrete Lagrangian h L((q0+q1)/2, (q1-q0)/h).
systems::ExampleModel make_unconstrained_fixture(const std::string& name, double stiffness,
                                                 double h)
{
  MechanicalLagrangian lag;
  lag.mass_matrix = [](const Vec&) -> Mat { return Mat::Identity(1, 1); };
  lag.potential = [stiffness](const Vec& q) { return 0.5 * stiffness * q[0] * q[0]; };
  lag.potential_gradient = [stiffness](const Vec& q) -> Vec { return stiffness * q; };

  DistributionSpec dist;
  dist.constraint_matrix = [](const Vec&) -> Mat { return Mat(0, 1); };
  dist.frame = [](const Vec&) -> Mat { return Mat::Identity(1, 1); };

  DiscreteLagrangian ld;
  ld.value = [h, stiffness](const Vec& q0, const Vec& q1) {
    const double v = (q1[0] - q0[0]) / h;
    const double m = 0.5 * (q0[0] + q1[0]);
    return h * (0.5 * v * v - 0.5 * stiffness * m * m);
  };
  ld.d1 = [h, stiffness](const Vec& q0, const Vec& q1) -> Vec {
    const double m = 0.5 * (q0[0] + q1[0]);
    return Vec::Constant(1, -(q1[0] - q0[0]) / h - 0.5 * h * stiffness * m);
  };
  ld.d2 = [h, stiffness](const Vec& q0, const Vec& q1) -> Vec {
    const double m = 0.5 * (q0[0] + q1[0]);
    return Vec::Constant(1, (q1[0] - q0[0]) / h - 0.5 * h * stiffness * m);
  };

  DiscretizationScheme del{"del", 1, ld, {}, {}, dist.frame};
  systems::ExampleModel model{name, NonholonomicSystem(lag, dist, 1, 0), del, del, {}, {"q"}, -1};
  model.restricted_h = [stiffness](const Vec& q, const Vec& p) {
    return 0.5 * p[0] * p[0] + 0.5 * stiffness * q[0] * q[0];
  };
  return model;
}

State default_start(SystemKind system)
{
  switch (system) {
  case SystemKind::particle: {
    Vec v(3);
    v << 1.0, 1.0, 0.0;
    return {Vec::Zero(3), v};
  }
  case SystemKind::knife_edge:
  case SystemKind::knife_edge_perturbed: {
    Vec v(3);
    v << 0.8, 0.0, 0.8;
    return {Vec::Zero(3), v};
  }
  case SystemKind::oscillator:
    return {Vec::Ones(1), Vec::Zero(1)};
  case SystemKind::free_particle:
    return {Vec::Zero(1), Vec::Ones(1)};
  }
  throw UsageError("unknown system");
}

// Newton on the discrete constraint over the given slots of q1.
Vec solve_discrete_slots(const DiscretizationScheme& scheme, const Vec& q0, Vec q1,
                         const std::vector<int>& slots)
{
  if (slots.empty()) {
    return q1;
  }
  auto residual = [&](const Vec& x) {
    Vec q = q1;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      q[slots[i]] = x[static_cast<Eigen::Index>(i)];
    }
    return scheme.constraints_d.value(q0, q);
  };
  Vec x(static_cast<Eigen::Index>(slots.size()));
  for (std::size_t i = 0; i < slots.size(); ++i) {
    x[static_cast<Eigen::Index>(i)] = q1[slots[i]];
  }
  Vec r = residual(x);
  for (int it = 0; it < 50 && numerics::sup_norm(r) > 1e-15; ++it) {
    const Mat jac = numerics::forward_jacobian(residual, x, r, 1e-7);
    const Vec dx = jac.colPivHouseholderQr().solve(-r);
    if (!dx.allFinite() || numerics::sup_norm(dx) <= 1e-16 * (1.0 + numerics::sup_norm(x))) {
      break;
    }
    x += dx;
    r = residual(x);
  }
  if (!(numerics::sup_norm(r) < 1e-12)) {
    throw UsageError("cannot solve the auto slots of q1 from the discrete constraint");
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    q1[slots[i]] = x[static_cast<Eigen::Index>(i)];
  }
  return q1;
}

double tail_std(const std::vector<double>& series, double fraction)
{
  if (series.empty()) {
    return 0.0;
  }
  const auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(series.size())));
  const std::size_t start = series.size() - std::clamp<std::size_t>(keep, 1, series.size());
  const auto count = static_cast<double>(series.size() - start);
  double mean = 0.0;
  for (std::size_t i = start; i < series.size(); ++i) {
    mean += series[i];
  }
  mean /= count;
  double var = 0.0;
  for (std::size_t i = start; i < series.size(); ++i) {
    var += (series[i] - mean) * (series[i] - mean);
  }
  return std::sqrt(var / count);
}

const DiscretizationScheme& scheme_for(const systems::ExampleModel& model, Method method)
{
  return method == Method::dla ? model.dla : model.mla;
}

std::vector<SeriesRow> discrete_rows(const systems::ExampleModel& model, Method method, double h,
                                     const std::vector<Vec>& points,
                                     const std::vector<int>& iterations)
{
  const auto& scheme = scheme_for(model, method);
  std::vector<SeriesRow> rows;
  rows.reserve(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    SeriesRow row;
    row.step = static_cast<int>(k);
    row.t = static_cast<double>(k) * h;
    row.q = points[k];
    if (k + 1 < points.size()) {
      row.p = projected_discrete_legendre(scheme, points[k], points[k + 1], Side::minus);
    } else {
      row.p = projected_discrete_legendre(scheme, points[k - 1], points[k], Side::plus);
    }
    row.h_restricted = model.restricted_h(row.q, row.p);
    row.omega_residual =
      k == 0 ? 0.0 : numerics::sup_norm(scheme.constraints_d.value(points[k - 1], points[k]));
    row.newton_iterations = iterations[k];
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_and_throw(const ExperimentConfig& config, const systems::ExampleModel& model,
                     std::vector<SeriesRow> rows, int index, const std::string& what)
{
  if (!config.output_path.empty()) {
    write_series_csv(config.output_path, model, rows);
  }
  throw ExperimentFailure(what, index, std::move(rows));
}

ExperimentResult run_discrete(const ExperimentConfig& config, const systems::ExampleModel& model,
                              const ConfigPair& pair)
{
  const auto& scheme = scheme_for(model, config.method);
  std::vector<Vec> points{pair.q0, pair.q1};
  std::vector<int> iterations{0, 0};
  for (int k = 0; k < config.n_steps; ++k) {
    try {
      auto step = mla_step(scheme, points[k], points[k + 1], config.settings);
      points.push_back(std::move(step.q_next));
      iterations.push_back(step.iterations);
    } catch (const Error& e) {
      // Keep as many rows as can still be evaluated (the last points may sit on a singularity).
      std::vector<SeriesRow> partial;
      while (points.size() >= 2) {
        try {
          partial = discrete_rows(model, config.method, config.h, points, iterations);
          break;
        } catch (const Error&) {
          points.pop_back();
          iterations.pop_back();
        }
      }
      write_and_throw(config, model, std::move(partial), k + 2,
                      "step " + std::to_string(k + 2) + " failed: " + e.what());
    }
  }
  ExperimentResult result;
  result.rows = discrete_rows(model, config.method, config.h, points, iterations);
  result.initial_pair = pair;
  return result;
}

SeriesRow continuous_row(const systems::ExampleModel& model, int step, double t, const State& s)
{
  SeriesRow row;
  row.step = step;
  row.t = t;
  row.q = s.q;
  row.p = momentum_restrict(model.system, s.q, legendre(model.system, s.q, s.v));
  row.h_restricted = model.restricted_h(row.q, row.p);
  row.omega_residual = numerics::sup_norm(constraint_residual(model.system, s.q, s.v));
  return row;
}

ExperimentResult run_exact(const ExperimentConfig& config, const systems::ExampleModel& model,
                           const ConfigPair& pair)
{
  const auto& sys = model.system;
  const auto& settings = config.settings;
  std::vector<SeriesRow> rows;
  ChartPoint q_prev = pair.q0;
  ChartPoint q_cur = pair.q1;
  double prev_error = 0.0;
  int prev_iterations = 0;
  const int total = config.n_steps + 2;
  for (int k = 0; k + 1 < total; ++k) {
    try {
      const ConfigPair current{q_prev, q_cur, config.h};
      const auto shot = retraction_shoot(sys, current, std::nullopt, settings);
      const State end = flow(sys, State{q_prev, shot.v0}, config.h, settings.flow_substeps);

      SeriesRow row;
      row.step = k;
      row.t = k * config.h;
      row.q = q_prev;
      row.p = momentum_restrict(sys, q_prev, legendre(sys, q_prev, shot.v0));
      row.h_restricted = model.restricted_h(row.q, row.p);
      row.omega_residual = prev_error;
      row.newton_iterations = prev_iterations;
      rows.push_back(std::move(row));
      prev_error = shot.terminal_error;
      prev_iterations = shot.iterations;

      const Velocity v1 = project_velocity(sys, q_cur, end.v);
      if (k + 2 == total) {
        SeriesRow last;
        last.step = k + 1;
        last.t = (k + 1) * config.h;
        last.q = q_cur;
        last.p = momentum_restrict(sys, q_cur, legendre(sys, q_cur, v1));
        last.h_restricted = model.restricted_h(last.q, last.p);
        last.omega_residual = prev_error;
        last.newton_iterations = prev_iterations;
        rows.push_back(std::move(last));
        break;
      }
      ChartPoint q_next = flow(sys, State{q_cur, v1}, config.h, settings.flow_substeps).q;
      q_prev = std::move(q_cur);
      q_cur = std::move(q_next);
    } catch (const Error& e) {
      write_and_throw(config, model, std::move(rows), k,
                      "exact step " + std::to_string(k) + " failed: " + e.what());
    }
  }
  ExperimentResult result;
  result.rows = std::move(rows);
  result.initial_pair = pair;
  return result;
}

ExperimentResult run_continuous(const ExperimentConfig& config,
                                const systems::ExampleModel& model, const ConfigPair& pair)
{
  const auto& sys = model.system;
  const auto shot = retraction_shoot(sys, pair, std::nullopt, config.settings);
  State s{pair.q0, shot.v0};
  std::vector<SeriesRow> rows;
  const int total = config.n_steps + 2;
  for (int k = 0; k < total; ++k) {
    try {
      if (k > 0) {
        s = flow(sys, s, config.h, config.settings.flow_substeps);
      }
      rows.push_back(continuous_row(model, k, k * config.h, s));
    } catch (const Error& e) {
      write_and_throw(config, model, std::move(rows), k,
                      "continuous sample " + std::to_string(k) + " failed: " + e.what());
    }
  }
  ExperimentResult result;
  result.rows = std::move(rows);
  result.initial_pair = pair;
  return result;
}

} // namespace

SystemKind parse_system(const std::string& name)
{
  if (name == "particle") {
    return SystemKind::particle;
  }
  if (name == "knife_edge") {
    return SystemKind::knife_edge;
  }
  if (name == "knife_edge_perturbed") {
    return SystemKind::knife_edge_perturbed;
  }
  if (name == "oscillator") {
    return SystemKind::oscillator;
  }
  if (name == "free_particle") {
    return SystemKind::free_particle;
  }
  throw UsageError("unknown system '" + name + "'");
}

Method parse_method(const std::string& name)
{
  if (name == "mla") {
    return Method::mla;
  }
  if (name == "dla") {
    return Method::dla;
  }
  if (name == "exact") {
    return Method::exact;
  }
  if (name == "continuous") {
    return Method::continuous;
  }
  throw UsageError("unknown method '" + name + "'");
}

std::string to_string(SystemKind kind)
{
  switch (kind) {
  case SystemKind::particle:
    return "particle";
  case SystemKind::knife_edge:
    return "knife_edge";
  case SystemKind::knife_edge_perturbed:
    return "knife_edge_perturbed";
  case SystemKind::oscillator:
    return "oscillator";
  case SystemKind::free_particle:
    return "free_particle";
  }
  return "?";
}

std::string to_string(Method method)
{
  switch (method) {
  case Method::mla:
    return "mla";
  case Method::dla:
    return "dla";
  case Method::exact:
    return "exact";
  case Method::continuous:
    return "continuous";
  }
  return "?";
}

PartialPoint parse_point(const std::string& text)
{
  PartialPoint point;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item == "auto") {
      point.emplace_back(std::nullopt);
    } else {
      point.emplace_back(parse_double("point", item));
    }
  }
  if (point.empty()) {
    throw UsageError("empty point '" + text + "'");
  }
  return point;
}

ExperimentConfig default_config(SystemKind system)
{
  ExperimentConfig c;
  c.system = system;
  c.h = 0.5;
  switch (system) {
  case SystemKind::particle:
    c.n_steps = 1200;
    c.q0 = {0.0, 0.0, 0.0};
    c.q1 = {0.4, 0.4, std::nullopt};
    break;
  case SystemKind::knife_edge:
  case SystemKind::knife_edge_perturbed:
    c.n_steps = 600;
    c.epsilon = system == SystemKind::knife_edge_perturbed ? 0.1 : 0.0;
    c.q0 = {0.0, 0.0, 0.0};
    // (x, y, phi): phi1 = 0.4, y1 solved from the constraint
    c.q1 = {0.4, std::nullopt, 0.4};
    break;
  case SystemKind::oscillator:
    c.n_steps = 100;
    c.q0 = {1.0};
    c.q1 = {std::cos(0.5)};
    break;
  case SystemKind::free_particle:
    c.n_steps = 100;
    c.q0 = {0.0};
    c.q1 = {0.5};
    break;
  }
  return c;
}

void validate(const ExperimentConfig& config)
{
  if (!(config.h > 0.0) || !std::isfinite(config.h)) {
    throw UsageError("h must be positive");
  }
  if (config.n_steps < 1) {
    throw UsageError("steps must be >= 1");
  }
  if (!(config.epsilon >= 0.0)) {
    throw UsageError("epsilon must be >= 0");
  }
  if (config.system == SystemKind::knife_edge_perturbed && !(config.epsilon > 0.0)) {
    throw UsageError("knife_edge_perturbed needs epsilon > 0");
  }
  if (!(config.tail_fraction > 0.0 && config.tail_fraction <= 1.0)) {
    throw UsageError("tail fraction must lie in (0, 1]");
  }
}

std::map<std::string, std::string> parse_key_values(std::istream& in)
{
  std::map<std::string, std::string> values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return values;
}

void apply_key_values(ExperimentConfig& config, const std::map<std::string, std::string>& values)
{
  for (const auto& [key, value] : values) {
    if (key == "system") {
      config.system = parse_system(value);
    } else if (key == "method") {
      config.method = parse_method(value);
    } else if (key == "h") {
      config.h = parse_double(key, value);
    } else if (key == "steps") {
      config.n_steps = static_cast<int>(parse_double(key, value));
    } else if (key == "epsilon") {
      config.epsilon = parse_double(key, value);
    } else if (key == "q0") {
      config.q0 = parse_point(value);
    } else if (key == "q1") {
      config.q1 = parse_point(value);
    } else if (key == "out") {
      config.output_path = value;
    } else if (key == "tail") {
      config.tail_fraction = parse_double(key, value);
    } else {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
}

systems::ExampleModel make_model(SystemKind system, double h, double epsilon)
{
  switch (system) {
  case SystemKind::particle:
    return systems::make_particle(h);
  case SystemKind::knife_edge:
  case SystemKind::knife_edge_perturbed:
    return systems::make_knife_edge({epsilon}, h);
  case SystemKind::oscillator:
    return make_unconstrained_fixture("oscillator", 1.0, h);
  case SystemKind::free_particle:
    return make_unconstrained_fixture("free_particle", 0.0, h);
  }
  throw UsageError("unknown system");
}

DriftReport make_drift_report(const std::vector<double>& h_series, double tail_fraction)
{
  DriftReport report;
  report.h_series = h_series;
  if (h_series.empty()) {
    return report;
  }
  report.reference_value = h_series.front();
  for (double v : h_series) {
    report.max_abs_drift = std::max(report.max_abs_drift, std::abs(v - report.reference_value));
  }
  report.tail_std = tail_std(h_series, tail_fraction);
  return report;
}

ConfigPair resolve_initial_pair(const ExperimentConfig& config, const systems::ExampleModel& model)
{
  const int n = model.system.dimension();
  const int k = model.system.corank();
  if (static_cast<int>(config.q0.size()) != n || static_cast<int>(config.q1.size()) != n) {
    throw UsageError("q0 and q1 need " + std::to_string(n) + " components");
  }
  Vec q0(n);
  Vec q1(n);
  std::vector<int> auto_slots;
  for (int i = 0; i < n; ++i) {
    if (!config.q0[i]) {
      throw UsageError("q0 cannot contain auto slots");
    }
    q0[i] = *config.q0[i];
    if (config.q1[i]) {
      q1[i] = *config.q1[i];
    } else {
      auto_slots.push_back(i);
      q1[i] = q0[i];
    }
  }
  if (!auto_slots.empty() && static_cast<int>(auto_slots.size()) != k) {
    throw UsageError("q1 needs exactly " + std::to_string(k) + " auto slots (or none)");
  }

  // Discrete resolution doubles as the starting point for the exact one.
  q1 = solve_discrete_slots(model.mla, q0, q1, auto_slots);
  if (config.method == Method::mla || config.method == Method::dla || auto_slots.empty()) {
    return {q0, q1, config.h};
  }
  std::vector<bool> fixed(n, true);
  for (int slot : auto_slots) {
    fixed[slot] = false;
  }
  return complete_exact_pair(model.system, q0, q1, fixed, config.h, config.settings);
}

ExperimentResult run_experiment(const ExperimentConfig& config)
{
  validate(config);
  const auto model = make_model(config.system, config.h, config.epsilon);
  const ConfigPair pair = resolve_initial_pair(config, model);

  ExperimentResult result;
  switch (config.method) {
  case Method::mla:
  case Method::dla:
    result = run_discrete(config, model, pair);
    break;
  case Method::exact:
    result = run_exact(config, model, pair);
    break;
  case Method::continuous:
    result = run_continuous(config, model, pair);
    break;
  }
  std::vector<double> series;
  series.reserve(result.rows.size());
  for (const auto& row : result.rows) {
    series.push_back(row.h_restricted);
  }
  result.report = make_drift_report(series, config.tail_fraction);
  if (!config.output_path.empty()) {
    write_series_csv(config.output_path, model, result.rows);
  }
  return result;
}

std::vector<std::string> series_header(const systems::ExampleModel& model)
{
  std::vector<std::string> header{"step", "t"};
  for (const auto& name : model.coordinate_names) {
    header.push_back(name);
  }
  for (int a = 1; a <= model.system.rank(); ++a) {
    header.push_back("p" + std::to_string(a));
  }
  header.insert(header.end(), {"H_restricted", "omega_residual_inf", "newton_iters"});
  return header;
}

void write_series_csv(const std::string& path, const systems::ExampleModel& model,
                      const std::vector<SeriesRow>& rows)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw UsageError("cannot open '" + path + "' for writing");
  }
  csv::Writer writer(out);
  writer.header(series_header(model));
  for (const auto& row : rows) {
    std::vector<std::string> fields{std::to_string(row.step), csv::format_number(row.t)};
    for (Eigen::Index i = 0; i < row.q.size(); ++i) {
      fields.push_back(csv::format_number(row.q[i]));
    }
    for (Eigen::Index i = 0; i < row.p.size(); ++i) {
      fields.push_back(csv::format_number(row.p[i]));
    }
    fields.push_back(csv::format_number(row.h_restricted));
    fields.push_back(csv::format_number(row.omega_residual));
    fields.push_back(std::to_string(row.newton_iterations));
    writer.row(fields);
  }
}

ReferenceFlow::ReferenceFlow(SystemKind system, const systems::ExampleModel& model, State start,
                             double max_rk4_step)
  : system_(system), model_(&model), start_(start), current_(std::move(start)),
    max_step_(max_rk4_step)
{
}

ChartPoint ReferenceFlow::at(double t)
{
  switch (system_) {
  case SystemKind::particle:
    return systems::particle::closed_flow(start_, t).q;
  case SystemKind::oscillator:
    return start_.q * std::cos(t) + start_.v * std::sin(t);
  case SystemKind::free_particle:
    return start_.q + start_.v * t;
  case SystemKind::knife_edge:
  case SystemKind::knife_edge_perturbed:
    break;
  }
  if (t < current_t_) {
    throw ContractViolation("ReferenceFlow: times must be non-decreasing");
  }
  const double span = t - current_t_;
  if (span > 0.0) {
    const int substeps = static_cast<int>(std::ceil(span / max_step_ - 1e-9));
    current_ = flow(model_->system, current_, span, std::max(1, substeps));
    current_t_ = t;
  }
  return current_.q;
}

ComparisonResult compare(const ExperimentConfig& a, const ExperimentConfig& b,
                         const std::string& output_path)
{
  validate(a);
  validate(b);
  if (a.system != b.system || a.h != b.h || a.n_steps != b.n_steps || a.epsilon != b.epsilon ||
      a.q0 != b.q0 || a.q1 != b.q1) {
    throw UsageError("compare: configurations must share system, h, steps, epsilon and initial pair");
  }
  ExperimentConfig run_a = a;
  ExperimentConfig run_b = b;
  run_a.output_path.clear();
  run_b.output_path.clear();
  auto future_a = std::async(std::launch::async, [&run_a] { return run_experiment(run_a); });
  auto future_b = std::async(std::launch::async, [&run_b] { return run_experiment(run_b); });
  const ExperimentResult res_a = future_a.get();
  const ExperimentResult res_b = future_b.get();

  const auto model = make_model(a.system, a.h, a.epsilon);
  ExperimentConfig discrete = a;
  discrete.method = Method::mla;
  const ConfigPair pair = resolve_initial_pair(discrete, model);
  const auto start = retraction_least_squares(model.system, pair, std::nullopt, a.settings);
  ReferenceFlow reference(a.system, model, State{pair.q0, start.v0},
                          a.h / kReferenceSubstepDivisor);

  ComparisonResult out;
  out.report_a = res_a.report;
  out.report_b = res_b.report;
  const std::size_t count = std::min(res_a.rows.size(), res_b.rows.size());
  for (std::size_t k = 0; k < count; ++k) {
    const double t = res_a.rows[k].t;
    const ChartPoint q_ref = reference.at(t);
    ComparisonRow row;
    row.step = static_cast<int>(k);
    row.t = t;
    row.h_a = res_a.rows[k].h_restricted;
    row.h_b = res_b.rows[k].h_restricted;
    row.err_a = (res_a.rows[k].q - q_ref).norm();
    row.err_b = (res_b.rows[k].q - q_ref).norm();
    out.max_err_a = std::max(out.max_err_a, row.err_a);
    out.max_err_b = std::max(out.max_err_b, row.err_b);
    out.rows.push_back(row);
  }

  if (!output_path.empty()) {
    std::ofstream file(output_path, std::ios::binary);
    if (!file) {
      throw UsageError("cannot open '" + output_path + "' for writing");
    }
    csv::Writer writer(file);
    writer.header({"step", "t", "H_A", "H_B", "err_A", "err_B"});
    for (const auto& row : out.rows) {
      writer.row({std::to_string(row.step), csv::format_number(row.t),
                  csv::format_number(row.h_a), csv::format_number(row.h_b),
                  csv::format_number(row.err_a), csv::format_number(row.err_b)});
    }
  }
  return out;
}

OrderEstimate estimate_order(const OrderConfig& config)
{
  if (config.h_list.size() < 3) {
    throw UsageError("estimate_order: need at least three step sizes");
  }
  if (!(config.horizon > 0.0)) {
    throw UsageError("estimate_order: horizon must be positive");
  }
  OrderEstimate est;
  for (double h : config.h_list) {
    if (!(h > 0.0)) {
      throw UsageError("estimate_order: step sizes must be positive");
    }
    const long total = std::lround(config.horizon / h);
    if (total < 2 || std::abs(total * h - config.horizon) > 1e-9 * config.horizon) {
      throw UsageError("estimate_order: horizon must be a multiple (>= 2) of every h");
    }
    const auto model = make_model(config.system, h, config.epsilon);
    const State start = default_start(config.system);
    ReferenceFlow reference(config.system, model, start, std::min(h, 1e-3));
    Vec q1 = reference.at(h);
    const ChartPoint q_end = reference.at(config.horizon);

    ChartPoint last;
    switch (config.method) {
    case Method::mla:
    case Method::dla: {
      const auto& scheme = scheme_for(model, config.method);
      std::vector<int> slots;
      if (model.constrained_slot >= 0) {
        slots.push_back(model.constrained_slot);
      }
      q1 = solve_discrete_slots(scheme, start.q, q1, slots);
      last = run(scheme, start.q, q1, static_cast<int>(total - 1), config.settings).points.back();
      break;
    }
    case Method::exact: {
      ConfigPair pair{start.q, q1, h};
      for (long k = 1; k < total; ++k) {
        pair = exact_discrete_flow(model.system, pair, config.settings);
      }
      last = pair.q1;
      break;
    }
    case Method::continuous:
      last = flow(model.system, start, config.horizon, static_cast<int>(total)).q;
      break;
    }
    const double err = (last - q_end).norm();
    est.h.push_back(h);
    est.errors.push_back(err);
    est.used.push_back(err > kOrderErrorFloor);
  }

  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < est.h.size(); ++i) {
    if (est.used[i]) {
      xs.push_back(std::log(est.h[i]));
      ys.push_back(std::log(est.errors[i]));
    }
  }
  if (xs.size() < 2) {
    est.at_floor = true;
    est.slope = std::numeric_limits<double>::quiet_NaN();
    return est;
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  est.slope = sxy / sxx;
  double ss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double fit = my + est.slope * (xs[i] - mx);
    ss += (ys[i] - fit) * (ys[i] - fit);
  }
  est.fit_residual = std::sqrt(ss / n);
  return est;
}

std::vector<IdentityRow> check_exact_identities(double h, int samples, std::uint64_t seed,
                                                const SolverSettings& settings)
{
  if (!(h > 0.0) || samples < 1) {
    throw UsageError("check_exact_identities: need h > 0 and samples >= 1");
  }
  const auto model = systems::make_particle(h);
  const auto& sys = model.system;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const PairFunction mu = [h](const Vec& a, const Vec& b) {
    return Vec::Constant(1, systems::particle::mu_d(a, b, h));
  };

  std::vector<IdentityRow> rows;
  for (int i = 0; i < samples; ++i) {
    Vec q0(3);
    q0 << unit(rng), unit(rng), unit(rng);
    Vec coords(2);
    coords << unit(rng), unit(rng);
    Velocity v0 = from_frame_coordinates(sys, q0, coords);
    if (i == 0) {
      v0.setZero();
    } else if (v0.norm() > 2.0) {
      v0 *= 2.0 / v0.norm();
    }

    IdentityRow row;
    row.sample = i;
    const ConfigPair pair = exp_nh(sys, q0, v0, h, settings);
    const ConfigPair next = exact_discrete_flow(sys, pair, settings);
    row.momentum_matching =
      numerics::sup_norm(exact_discrete_legendre(sys, pair, Side::plus, settings) -
                         exact_discrete_legendre(sys, next, Side::minus, settings));
    const auto shot = retraction_shoot(sys, pair, std::nullopt, settings);
    row.retraction_gap = numerics::sup_norm(
      shot.v0 - systems::particle::retraction_closed(pair.q0, pair.q1, h));
    row.mu_d = std::abs(systems::particle::mu_d(pair.q0, pair.q1, h));

    // Tangent moving x1 with z1 following the submanifold.
    const Vec grad = systems::particle::mu_d_gradient(pair.q0, pair.q1, h);
    Vec x1(3);
    x1 << 1.0, 0.0, -grad[3] / grad[5];
    const auto identity = exact_one_form_identity(sys, pair, Vec::Zero(3), x1, settings, mu);
    row.one_form_gap = identity.relative_gap();

    row.passed = row.momentum_matching < kMomentumMatchingThreshold &&
                 row.retraction_gap < kRetractionThreshold && row.mu_d < kMuDThreshold &&
                 row.one_form_gap < kOneFormThreshold;
    rows.push_back(row);
  }
  return rows;
}

} // namespace nhint::harness
