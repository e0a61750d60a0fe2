// nhsim: run nonholonomic integrator experiments and write CSV series.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nhint/csv.hpp"
#include "nhint/harness.hpp"

namespace {

using nhint::csv::format_number;
namespace hs = nhint::harness;

enum ExitCode { kOk = 0, kUsage = 1, kSolver = 2, kIdentity = 3 };

struct CommonFlags
{
  std::string system;
  std::vector<std::string> methods;
  std::string h;
  std::string steps;
  std::string epsilon;
  std::string q0;
  std::string q1;
  std::string out;
  std::string config;
  std::string tail;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool two_methods)
{
  cmd->add_option("--system", f.system, "particle | knife_edge | knife_edge_perturbed");
  if (two_methods) {
    cmd->add_option("--method", f.methods, "mla | dla | exact | continuous (give it twice)")
      ->expected(1, 2);
  } else {
    cmd->add_option("--method", f.methods, "mla | dla | exact | continuous")->expected(1);
  }
  cmd->add_option("--h", f.h, "time step");
  cmd->add_option("--steps", f.steps, "number of steps N");
  cmd->add_option("--epsilon", f.epsilon, "knife-edge perturbation");
  cmd->add_option("--q0", f.q0, "initial configuration, comma separated");
  cmd->add_option("--q1", f.q1, "second configuration, 'auto' marks the constrained slot");
  cmd->add_option("--out", f.out, "CSV output path");
  cmd->add_option("--config", f.config, "key=value file; flags take precedence");
  cmd->add_option("--tail", f.tail, "fraction of the series used for tail_std");
}

std::map<std::string, std::string> merged_values(const CommonFlags& f)
{
  std::map<std::string, std::string> values;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) {
      throw nhint::UsageError("cannot read config file '" + f.config + "'");
    }
    values = hs::parse_key_values(in);
  }
  const std::pair<const char*, const std::string*> flags[] = {
    {"system", &f.system}, {"h", &f.h},   {"steps", &f.steps}, {"epsilon", &f.epsilon},
    {"q0", &f.q0},         {"q1", &f.q1}, {"out", &f.out},     {"tail", &f.tail}};
  for (const auto& [key, value] : flags) {
    if (!value->empty()) {
      values[key] = *value;
    }
  }
  if (!f.methods.empty()) {
    values["method"] = f.methods.front();
  }
  return values;
}

hs::ExperimentConfig build_config(std::map<std::string, std::string> values)
{
  const auto system_it = values.find("system");
  const auto system =
    system_it == values.end() ? hs::SystemKind::particle : hs::parse_system(system_it->second);
  auto config = hs::default_config(system);
  values.erase("system");
  hs::apply_key_values(config, values);
  hs::validate(config);
  return config;
}

void print_report(const std::string& prefix, const hs::DriftReport& r)
{
  std::cout << prefix << "reference_H=" << format_number(r.reference_value) << '\n'
            << prefix << "max_abs_drift=" << format_number(r.max_abs_drift) << '\n'
            << prefix << "tail_std=" << format_number(r.tail_std) << '\n';
}

int cmd_simulate(const CommonFlags& f)
{
  const auto config = build_config(merged_values(f));
  const auto result = hs::run_experiment(config);
  double max_omega = 0.0;
  int max_iters = 0;
  for (const auto& row : result.rows) {
    max_omega = std::max(max_omega, row.omega_residual);
    max_iters = std::max(max_iters, row.newton_iterations);
  }
  std::cout << "system=" << hs::to_string(config.system) << '\n'
            << "method=" << hs::to_string(config.method) << '\n'
            << "h=" << format_number(config.h) << '\n'
            << "steps=" << config.n_steps << '\n'
            << "rows=" << result.rows.size() << '\n';
  print_report("", result.report);
  std::cout << "max_omega_residual=" << format_number(max_omega) << '\n'
            << "max_newton_iters=" << max_iters << '\n';
  if (!config.output_path.empty()) {
    std::cout << "out=" << config.output_path << '\n';
  }
  return kOk;
}

int cmd_compare(const CommonFlags& f)
{
  if (f.methods.size() != 2) {
    throw nhint::UsageError("compare needs --method twice");
  }
  auto values = merged_values(f);
  const std::string out = values.count("out") ? values["out"] : std::string();
  values.erase("out");
  values["method"] = f.methods[0];
  const auto a = build_config(values);
  values["method"] = f.methods[1];
  const auto b = build_config(values);
  const auto result = hs::compare(a, b, out);
  std::cout << "system=" << hs::to_string(a.system) << '\n'
            << "method_A=" << hs::to_string(a.method) << '\n'
            << "method_B=" << hs::to_string(b.method) << '\n'
            << "rows=" << result.rows.size() << '\n';
  print_report("A_", result.report_a);
  std::cout << "A_max_err=" << format_number(result.max_err_a) << '\n';
  print_report("B_", result.report_b);
  std::cout << "B_max_err=" << format_number(result.max_err_b) << '\n';
  if (!out.empty()) {
    std::cout << "out=" << out << '\n';
  }
  return kOk;
}

std::vector<double> parse_list(const std::string& text)
{
  std::vector<double> list;
  for (const auto& entry : hs::parse_point(text)) {
    if (!entry) {
      throw nhint::UsageError("'auto' is not a step size");
    }
    list.push_back(*entry);
  }
  return list;
}

int cmd_order(const std::string& system, const std::string& method, const std::string& h_list,
              double horizon, double epsilon)
{
  hs::OrderConfig config;
  config.system = hs::parse_system(system);
  config.method = hs::parse_method(method);
  config.h_list = parse_list(h_list);
  config.horizon = horizon;
  config.epsilon = epsilon;
  if (config.system == hs::SystemKind::knife_edge_perturbed && epsilon == 0.0) {
    config.epsilon = 0.1;
  }
  const auto est = hs::estimate_order(config);
  std::cout << "system=" << system << '\n' << "method=" << method << '\n';
  for (std::size_t i = 0; i < est.h.size(); ++i) {
    std::cout << "error_h" << i << '=' << format_number(est.h[i]) << ','
              << format_number(est.errors[i]) << (est.used[i] ? "" : ",excluded") << '\n';
  }
  if (est.at_floor) {
    std::cout << "slope=floor\n";
  } else {
    std::cout << "slope=" << format_number(est.slope) << '\n'
              << "fit_residual=" << format_number(est.fit_residual) << '\n';
  }
  return kOk;
}

int cmd_check_exact(double h, int samples, std::uint64_t seed, const std::string& out)
{
  const auto rows = hs::check_exact_identities(h, samples, seed);
  if (!out.empty()) {
    std::ofstream file(out, std::ios::binary);
    if (!file) {
      throw nhint::UsageError("cannot open '" + out + "' for writing");
    }
    nhint::csv::Writer writer(file);
    writer.header({"sample", "momentum_matching", "retraction_gap", "mu_d", "one_form_gap",
                   "passed"});
    for (const auto& r : rows) {
      writer.row({std::to_string(r.sample), format_number(r.momentum_matching),
                  format_number(r.retraction_gap), format_number(r.mu_d),
                  format_number(r.one_form_gap), r.passed ? "1" : "0"});
    }
  }
  int failed = 0;
  double worst[4] = {0.0, 0.0, 0.0, 0.0};
  for (const auto& r : rows) {
    failed += r.passed ? 0 : 1;
    worst[0] = std::max(worst[0], r.momentum_matching);
    worst[1] = std::max(worst[1], r.retraction_gap);
    worst[2] = std::max(worst[2], r.mu_d);
    worst[3] = std::max(worst[3], r.one_form_gap);
  }
  std::cout << "h=" << format_number(h) << '\n'
            << "samples=" << rows.size() << '\n'
            << "failed=" << failed << '\n'
            << "max_momentum_matching=" << format_number(worst[0]) << '\n'
            << "max_retraction_gap=" << format_number(worst[1]) << '\n'
            << "max_mu_d=" << format_number(worst[2]) << '\n'
            << "max_one_form_gap=" << format_number(worst[3]) << '\n';
  return failed == 0 ? kOk : kIdentity;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Nonholonomic integrator benchmark harness"};
  // "-h" would collide with the --h step flag.
  app.set_help_flag("--help", "print this help message and exit");
  app.require_subcommand(1);

  CommonFlags sim_flags;
  auto* simulate = app.add_subcommand("simulate", "run one experiment and write its CSV series");
  add_common(simulate, sim_flags, false);

  CommonFlags cmp_flags;
  auto* compare = app.add_subcommand("compare", "run two methods against the reference flow");
  add_common(compare, cmp_flags, true);

  std::string order_system = "particle";
  std::string order_method = "mla";
  std::string order_h = "0.2,0.1,0.05,0.025";
  double order_horizon = 2.0;
  double order_epsilon = 0.0;
  auto* order = app.add_subcommand("order", "estimate the empirical order of a method");
  order->add_option("--system", order_system,
                    "particle | knife_edge | knife_edge_perturbed | oscillator | free_particle");
  order->add_option("--method", order_method, "mla | dla | exact | continuous");
  order->add_option("--h", order_h, "comma separated step sizes");
  order->add_option("--horizon", order_horizon, "final time");
  order->add_option("--epsilon", order_epsilon, "knife-edge perturbation");

  double check_h = 0.5;
  int check_samples = 20;
  std::uint64_t check_seed = 7;
  std::string check_out;
  auto* check = app.add_subcommand("check-exact", "verify the exact discrete identities");
  check->add_option("--h", check_h, "time step");
  check->add_option("--samples", check_samples, "number of random pairs");
  check->add_option("--seed", check_seed, "random seed");
  check->add_option("--out", check_out, "CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*simulate) {
      return cmd_simulate(sim_flags);
    }
    if (*compare) {
      return cmd_compare(cmp_flags);
    }
    if (*order) {
      return cmd_order(order_system, order_method, order_h, order_horizon, order_epsilon);
    }
    return cmd_check_exact(check_h, check_samples, check_seed, check_out);
  } catch (const nhint::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const hs::ExperimentFailure& e) {
    std::cerr << "solver failure at index " << e.step_index << ": " << e.what() << '\n';
    return kSolver;
  } catch (const nhint::Error& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolver;
  }
}
