#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nhint/exact_discrete.hpp"
#include "nhint/systems.hpp"

namespace nhint::harness {

// oscillator and free_particle are unconstrained fixtures used by order estimation.
enum class SystemKind { particle, knife_edge, knife_edge_perturbed, oscillator, free_particle };
enum class Method { mla, dla, exact, continuous };

SystemKind parse_system(const std::string& name);
Method parse_method(const std::string& name);
std::string to_string(SystemKind kind);
std::string to_string(Method method);

/// Component list where std::nullopt marks a slot to be solved from the constraint ("auto").
using PartialPoint = std::vector<std::optional<double>>;

/// Parses "0.4,auto,0.4".
PartialPoint parse_point(const std::string& text);

struct ExperimentConfig
{
  SystemKind system = SystemKind::particle;
  Method method = Method::mla;
  double h = 0.5;
  int n_steps = 1200;
  double epsilon = 0.0;
  PartialPoint q0;
  PartialPoint q1;
  std::string output_path;
  // Fraction of the series (taken from the end) used for tail statistics.
  double tail_fraction = 0.8;
  SolverSettings settings;
};

/// Experiment settings for each system: particle N = 1200, knife edges N = 600, h = 0.5,
/// perturbation 0.1; initial pair q0 = 0 and q1 with the constrained slot on "auto".
ExperimentConfig default_config(SystemKind system);

/// Throws UsageError when the configuration is invalid.
void validate(const ExperimentConfig& config);

/// Overrides config fields from key=value text ('#' starts a comment). Keys: system,
/// method, h, steps, epsilon, q0, q1, out, tail.
void apply_key_values(ExperimentConfig& config, const std::map<std::string, std::string>& values);
std::map<std::string, std::string> parse_key_values(std::istream& in);

systems::ExampleModel make_model(SystemKind system, double h, double epsilon);

struct SeriesRow
{
  int step = 0;
  double t = 0.0;
  Vec q;
  Vec p;
  double h_restricted = 0.0;
  double omega_residual = 0.0;
  int newton_iterations = 0;
};

struct DriftReport
{
  std::vector<double> h_series;
  double max_abs_drift = 0.0;
  double tail_std = 0.0;
  double reference_value = 0.0;
};

/// max |H_k - H_0| and the standard deviation over the final tail_fraction of the series.
DriftReport make_drift_report(const std::vector<double>& h_series, double tail_fraction);

struct ExperimentResult
{
  std::vector<SeriesRow> rows;
  DriftReport report;
  ConfigPair initial_pair;
};

/// Raised when a run stops early; the rows computed so far are kept (and written).
class ExperimentFailure : public Error
{
public:
  ExperimentFailure(const std::string& what, int index, std::vector<SeriesRow> partial)
    : Error(what), step_index(index), rows(std::move(partial))
  {
  }
  int step_index;
  std::vector<SeriesRow> rows;
};

/// Initial pair with "auto" slots resolved: from the discrete constraint for mla/dla,
/// from the exact submanifold for exact/continuous.
ConfigPair resolve_initial_pair(const ExperimentConfig& config, const systems::ExampleModel& model);

/// Runs one experiment; writes the CSV when config.output_path is set.
ExperimentResult run_experiment(const ExperimentConfig& config);

std::vector<std::string> series_header(const systems::ExampleModel& model);
void write_series_csv(const std::string& path, const systems::ExampleModel& model,
                      const std::vector<SeriesRow>& rows);

struct ComparisonRow
{
  int step = 0;
  double t = 0.0;
  double h_a = 0.0;
  double h_b = 0.0;
  double err_a = 0.0;
  double err_b = 0.0;
};

struct ComparisonResult
{
  std::vector<ComparisonRow> rows;
  DriftReport report_a;
  DriftReport report_b;
  double max_err_a = 0.0;
  double max_err_b = 0.0;
};

/// Runs both configurations (concurrently) and measures each against the reference flow
/// started from the least-squares retraction of the initial pair: closed form for the
/// particle, RK4 with substep h/500 otherwise.
ComparisonResult compare(const ExperimentConfig& a, const ExperimentConfig& b,
                         const std::string& output_path = {});

/// Reference configuration at time t for the continuous motion from `start`.
class ReferenceFlow
{
public:
  ReferenceFlow(SystemKind system, const systems::ExampleModel& model, State start,
                double max_rk4_step);
  /// Times must be non-decreasing across calls.
  ChartPoint at(double t);

private:
  SystemKind system_;
  const systems::ExampleModel* model_;
  State start_;
  State current_;
  double current_t_ = 0.0;
  double max_step_;
};

struct OrderConfig
{
  SystemKind system = SystemKind::particle;
  Method method = Method::mla;
  std::vector<double> h_list;
  double horizon = 2.0;
  double epsilon = 0.0;
  SolverSettings settings;
};

struct OrderEstimate
{
  std::vector<double> h;
  std::vector<double> errors;
  std::vector<bool> used;
  double slope = 0.0;
  double fit_residual = 0.0;
  // Fewer than two errors above the 1e-12 floor.
  bool at_floor = false;
};

/// Least-squares slope of log(terminal error) against log(h).
OrderEstimate estimate_order(const OrderConfig& config);

struct IdentityRow
{
  int sample = 0;
  double momentum_matching = 0.0;
  double retraction_gap = 0.0;
  double mu_d = 0.0;
  double one_form_gap = 0.0;
  bool passed = false;
};

inline constexpr double kMomentumMatchingThreshold = 1e-8;
inline constexpr double kRetractionThreshold = 1e-8;
inline constexpr double kMuDThreshold = 1e-8;
inline constexpr double kOneFormThreshold = 1e-4;

/// Random exact particle pairs (sample 0 at rest): momentum matching, closed-form vs
/// shooting retraction, mu_d, and the relative gap of d l + beta = sigma.
std::vector<IdentityRow> check_exact_identities(double h, int samples, std::uint64_t seed = 7,
                                                const SolverSettings& settings = {});

} // namespace nhint::harness
