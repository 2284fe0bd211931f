#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "harness.hpp"

namespace {

using cgrom::ParamVector;
using cgrom::harness::ConfigError;
using cgrom::harness::ExperimentConfig;
using cgrom::harness::RunArtifacts;

struct Overrides {
  std::string output;
  long basis_size = 0;
  int steps = 0;
  std::vector<std::string> projections;
  std::vector<std::string> mu;
  std::vector<long> sizes;
};

ParamVector parse_mu(const std::string& text, cgrom::Index dim) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--mu: '" + text + "' is not a comma separated list of numbers");
    }
  }
  if (static_cast<cgrom::Index>(values.size()) != dim)
    throw ConfigError("--mu: expected " + std::to_string(dim) + " entries in '" + text + "'");
  return ParamVector(values);
}

void apply(const Overrides& o, ExperimentConfig& c) {
  if (!o.output.empty()) c.output = o.output;
  if (o.basis_size > 0) c.basis_size = static_cast<cgrom::Index>(o.basis_size);
  if (o.steps > 0) c.steps = o.steps;
  if (!o.projections.empty()) {
    c.projections.clear();
    for (const auto& p : o.projections) {
      try {
        c.projections.push_back(cgrom::parse_projection_kind(p));
      } catch (const cgrom::ContractViolation& e) {
        throw ConfigError(std::string("--projection: ") + e.what());
      }
    }
  }
  if (!o.mu.empty()) {
    const cgrom::Index dim = c.online.front().size();
    c.online.clear();
    for (const auto& m : o.mu) c.online.push_back(parse_mu(m, dim));
  }
  if (!o.sizes.empty()) {
    c.sweep_sizes.clear();
    for (long q : o.sizes) {
      if (q < 1) throw ConfigError("--sizes: basis sizes must be positive");
      c.sweep_sizes.push_back(static_cast<cgrom::Index>(q));
    }
  }
}

void report(const RunArtifacts& a) {
  for (const auto& r : a.runs)
    if (!r.completed) std::cerr << "failed: " << r.directory << ": " << r.message << '\n';
  std::cout << a.runs.size() << " run(s), " << a.files.size() << " file(s) written"
            << (a.all_completed ? "" : "; some runs failed") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained Galerkin and LSPG reduced-order model experiments"};
  app.require_subcommand(1);
  std::string config_path;
  Overrides o;
  app.add_option("--config", config_path, "Experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--output", o.output, "Override the output directory");
  app.add_option("--basis-size", o.basis_size, "Override basis.size")->check(CLI::PositiveNumber);
  app.add_option("--steps", o.steps, "Override scheme.steps")->check(CLI::PositiveNumber);
  app.add_option("--projection", o.projections, "Override projections (galerkin, lspg)");
  app.add_option("--mu", o.mu, "Override the online points, e.g. --mu 1.3,0.7");
  app.add_option("--sizes", o.sizes, "Override sweep.sizes");

  auto* fom = app.add_subcommand("fom", "Full-order trajectories at the online points");
  auto* offline = app.add_subcommand("offline", "Training runs, POD basis and training TV maxima");
  auto* online = app.add_subcommand("online", "Reduced-order runs with the stored basis");
  auto* snapshot = app.add_subcommand("project-snapshot", "Orthogonal vs tvb-constrained snapshot projection");
  auto* sweep = app.add_subcommand("sweep", "Online runs over several basis sizes");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig config = cgrom::harness::parse_config(config_path);
    apply(o, config);
    RunArtifacts artifacts;
    if (fom->parsed()) artifacts = cgrom::harness::run_fom(config);
    else if (offline->parsed()) artifacts = cgrom::harness::run_offline(config);
    else if (online->parsed()) artifacts = cgrom::harness::run_online(config);
    else if (snapshot->parsed()) artifacts = cgrom::harness::run_snapshot_projection_study(config);
    else if (sweep->parsed()) artifacts = cgrom::harness::run_sweep(config);
    report(artifacts);
    return artifacts.all_completed ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
