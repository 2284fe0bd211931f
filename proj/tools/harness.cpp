#include "harness.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace cgrom::harness {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  if (!obj.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& item : obj.items())
    if (allowed.count(item.key()) == 0) fail(join(path, item.key()), "unknown key");
}

const json* find(const json& obj, const std::string& key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double read_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

long long read_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<long long>();
}

bool read_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  return j.get<bool>();
}

std::string read_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

ParamVector read_point(const json& j, const std::string& path, Index dim) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  if (static_cast<Index>(j.size()) != dim)
    fail(path, "expected " + std::to_string(dim) + " entries, got " + std::to_string(j.size()));
  std::vector<double> v;
  for (std::size_t k = 0; k < j.size(); ++k) v.push_back(read_number(j[k], path + "[" + std::to_string(k) + "]"));
  return ParamVector(v);
}

std::vector<ParamVector> read_points(const json& j, const std::string& path, Index dim) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of parameter vectors");
  std::vector<ParamVector> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(read_point(j[i], path + "[" + std::to_string(i) + "]", dim));
  return out;
}

struct ModelDefaults {
  Index param_dim;
  std::string scheme;
  int steps;
  std::vector<ParamVector> training;
  std::vector<ParamVector> online;
};

ModelDefaults model_defaults(const std::string& model, const std::string& path) {
  if (model == "burgers")
    return {2, "backward_euler", BurgersModel::default_steps(), BurgersModel::training_set(), {{0.9, 0.3}, {1.3, 0.7}}};
  if (model == "euler")
    return {2, "explicit_euler", EulerModel::default_steps(), EulerModel::training_set(), {{1.25, 1.5}}};
  if (model == "diffusion")
    return {4, "backward_euler", DiffusionModel::default_steps(), DiffusionModel::training_set(),
            {DiffusionModel::online_point()}};
  fail(path, "unknown model '" + model + "' (expected burgers, euler or diffusion)");
}

void read_solver(const json& j, const std::string& path, SolverOptions& s) {
  check_keys(j, path, {"max_iter", "ftol", "gtol", "xtol", "constraint_tol"});
  if (const json* v = find(j, "max_iter")) s.max_iter = static_cast<int>(read_integer(*v, join(path, "max_iter")));
  if (const json* v = find(j, "ftol")) s.ftol = read_number(*v, join(path, "ftol"));
  if (const json* v = find(j, "gtol")) s.gtol = read_number(*v, join(path, "gtol"));
  if (const json* v = find(j, "xtol")) s.xtol = read_number(*v, join(path, "xtol"));
  if (const json* v = find(j, "constraint_tol")) s.constraint_tol = read_number(*v, join(path, "constraint_tol"));
  try {
    s.validate();
  } catch (const ContractViolation& e) {
    fail(path, e.what());
  }
}

void read_newton(const json& j, const std::string& path, NewtonOptions& n) {
  check_keys(j, path, {"abs_tol", "rel_tol", "max_iter"});
  if (const json* v = find(j, "abs_tol")) n.abs_tol = read_number(*v, join(path, "abs_tol"));
  if (const json* v = find(j, "rel_tol")) n.rel_tol = read_number(*v, join(path, "rel_tol"));
  if (const json* v = find(j, "max_iter")) n.max_iter = static_cast<int>(read_integer(*v, join(path, "max_iter")));
  if (!(n.abs_tol > 0.0) || !(n.rel_tol > 0.0) || n.max_iter < 1) fail(path, "tolerances and max_iter must be positive");
}

void read_hybrid(const json& j, const std::string& path, HybridOptions& h) {
  check_keys(j, path, {"maxfev", "xtol", "factor"});
  if (const json* v = find(j, "maxfev")) h.maxfev = static_cast<int>(read_integer(*v, join(path, "maxfev")));
  if (const json* v = find(j, "xtol")) h.xtol = read_number(*v, join(path, "xtol"));
  if (const json* v = find(j, "factor")) h.factor = read_number(*v, join(path, "factor"));
  if (h.maxfev < 1 || !(h.xtol > 0.0) || !(h.factor > 0.0)) fail(path, "maxfev, xtol and factor must be positive");
}

RsumSpec read_rsum(const json& j, const std::string& path) {
  RsumSpec spec;
  if (j.is_boolean()) {
    if (!j.get<bool>()) fail(path, "use the absence of the key to disable rsum");
    return spec;
  }
  check_keys(j, path, {"matrix"});
  const json* m = find(j, "matrix");
  if (m == nullptr) return spec;
  const std::string mp = join(path, "matrix");
  if (m->is_string()) {
    const std::string s = m->get<std::string>();
    if (s == "model") spec.kind = RsumSpec::Kind::model;
    else if (s == "ones") spec.kind = RsumSpec::Kind::ones;
    else fail(mp, "expected \"model\", \"ones\" or a list of [begin, end) ranges");
    return spec;
  }
  if (!m->is_array() || m->empty()) fail(mp, "expected \"model\", \"ones\" or a list of [begin, end) ranges");
  spec.kind = RsumSpec::Kind::rows;
  for (std::size_t i = 0; i < m->size(); ++i) {
    const std::string rp = mp + "[" + std::to_string(i) + "]";
    const json& r = (*m)[i];
    if (!r.is_array() || r.size() != 2) fail(rp, "expected [begin, end)");
    const auto b = read_integer(r[0], rp + "[0]");
    const auto e = read_integer(r[1], rp + "[1]");
    if (b < 0 || e <= b) fail(rp, "need 0 <= begin < end");
    spec.ranges.emplace_back(static_cast<Index>(b), static_cast<Index>(e));
  }
  return spec;
}

std::vector<std::vector<std::string>> power_set(const std::vector<std::string>& names) {
  std::vector<std::vector<std::string>> out;
  const std::size_t n = names.size();
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    std::vector<std::string> combo;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (std::size_t{1} << i)) combo.push_back(names[i]);
    out.push_back(combo);
  }
  return out;
}

}  // namespace

std::vector<std::string> ConstraintSpec::declared() const {
  std::vector<std::string> out;
  if (rsum) out.emplace_back("rsum");
  if (tvd) out.emplace_back("tvd");
  if (tvb_factor) out.emplace_back("tvb");
  if (ec) out.emplace_back("ec");
  return out;
}

ExperimentConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("<root>: malformed JSON: ") + e.what());
  }
  check_keys(root, "", {"model", "model_options", "scheme", "training", "basis", "projections", "constraints",
                        "combinations", "online", "solver", "newton", "hybrid", "sweep", "snapshot_study", "output",
                        "seed"});
  ExperimentConfig c;

  const json* model = find(root, "model");
  if (model == nullptr) fail("model", "required key is missing");
  c.model = read_string(*model, "model");
  const ModelDefaults defaults = model_defaults(c.model, "model");

  if (const json* mo = find(root, "model_options")) {
    check_keys(*mo, "model_options", {"size", "final_time"});
    if (const json* v = find(*mo, "size")) {
      const auto size = read_integer(*v, "model_options.size");
      if (size < 3) fail("model_options.size", "must be at least 3");
      c.model_size = static_cast<Index>(size);
    }
    if (const json* v = find(*mo, "final_time")) {
      c.final_time = read_number(*v, "model_options.final_time");
      if (!(*c.final_time > 0.0)) fail("model_options.final_time", "must be positive");
    }
  }

  c.scheme = defaults.scheme;
  c.steps = defaults.steps;
  if (const json* s = find(root, "scheme")) {
    check_keys(*s, "scheme", {"kind", "steps"});
    if (const json* v = find(*s, "kind")) c.scheme = read_string(*v, "scheme.kind");
    if (const json* v = find(*s, "steps")) c.steps = static_cast<int>(read_integer(*v, "scheme.steps"));
  }
  if (c.scheme != "backward_euler" && c.scheme != "explicit_euler")
    fail("scheme.kind", "expected backward_euler or explicit_euler");
  if (c.steps < 1) fail("scheme.steps", "must be at least 1");

  c.training = defaults.training;
  if (const json* t = find(root, "training")) {
    if (!(t->is_string() && t->get<std::string>() == "default"))
      c.training = read_points(*t, "training", defaults.param_dim);
  }

  const json* basis = find(root, "basis");
  if (basis == nullptr) fail("basis", "required key is missing");
  check_keys(*basis, "basis", {"size", "reference"});
  const json* size = find(*basis, "size");
  if (size == nullptr) fail("basis.size", "required key is missing");
  const auto p = read_integer(*size, "basis.size");
  if (p < 1) fail("basis.size", "must be at least 1");
  c.basis_size = static_cast<Index>(p);
  if (const json* v = find(*basis, "reference")) {
    const std::string r = read_string(*v, "basis.reference");
    if (r == "initial") c.reference = ReferencePolicy::initial;
    else if (r == "zero") c.reference = ReferencePolicy::zero;
    else fail("basis.reference", "expected initial or zero");
  }

  c.projections = {ProjectionKind::galerkin, ProjectionKind::lspg};
  if (const json* pr = find(root, "projections")) {
    if (!pr->is_array() || pr->empty()) fail("projections", "expected a non-empty array");
    c.projections.clear();
    for (std::size_t i = 0; i < pr->size(); ++i) {
      const std::string pp = "projections[" + std::to_string(i) + "]";
      try {
        c.projections.push_back(parse_projection_kind(read_string((*pr)[i], pp)));
      } catch (const ContractViolation& e) {
        fail(pp, e.what());
      }
    }
  }

  if (const json* cs = find(root, "constraints")) {
    check_keys(*cs, "constraints", {"rsum", "tvd", "tvb", "ec"});
    if (const json* v = find(*cs, "rsum")) c.constraints.rsum = read_rsum(*v, "constraints.rsum");
    if (const json* v = find(*cs, "tvd")) c.constraints.tvd = read_bool(*v, "constraints.tvd");
    if (const json* v = find(*cs, "tvb")) {
      check_keys(*v, "constraints.tvb", {"factor"});
      const json* f = find(*v, "factor");
      if (f == nullptr) fail("constraints.tvb.factor", "required key is missing");
      const double factor = read_number(*f, "constraints.tvb.factor");
      if (!(factor > 0.0)) fail("constraints.tvb.factor", "must be positive");
      c.constraints.tvb_factor = factor;
    }
    if (const json* v = find(*cs, "ec")) c.constraints.ec = read_bool(*v, "constraints.ec");
  }
  if (c.constraints.ec && c.model != "diffusion")
    fail("constraints.ec", "energy conservation needs an energy map; only the diffusion model defines one");
  if (c.constraints.rsum && c.constraints.rsum->kind == RsumSpec::Kind::model && c.model == "euler")
    fail("constraints.rsum.matrix", "the euler model has no default rsum matrix; give \"ones\" or ranges");

  const std::vector<std::string> declared = c.constraints.declared();
  if (const json* co = find(root, "combinations")) {
    if (!co->is_array() || co->empty()) fail("combinations", "expected a non-empty array of name lists");
    for (std::size_t i = 0; i < co->size(); ++i) {
      const std::string cp = "combinations[" + std::to_string(i) + "]";
      if (!(*co)[i].is_array()) fail(cp, "expected an array of constraint names");
      std::vector<std::string> combo;
      for (std::size_t k = 0; k < (*co)[i].size(); ++k) {
        const std::string name = read_string((*co)[i][k], cp + "[" + std::to_string(k) + "]");
        if (std::find(declared.begin(), declared.end(), name) == declared.end())
          fail(cp + "[" + std::to_string(k) + "]", "constraint '" + name + "' is not declared under constraints");
        if (std::find(combo.begin(), combo.end(), name) != combo.end())
          fail(cp + "[" + std::to_string(k) + "]", "duplicate constraint '" + name + "'");
        combo.push_back(name);
      }
      std::vector<std::string> ordered;
      for (const auto& d : declared)
        if (std::find(combo.begin(), combo.end(), d) != combo.end()) ordered.push_back(d);
      c.combinations.push_back(ordered);
    }
  } else {
    c.combinations = power_set(declared);
  }

  c.online = defaults.online;
  if (const json* o = find(root, "online")) c.online = read_points(*o, "online", defaults.param_dim);

  if (const json* v = find(root, "solver")) read_solver(*v, "solver", c.solver);
  if (const json* v = find(root, "newton")) read_newton(*v, "newton", c.newton);
  if (const json* v = find(root, "hybrid")) read_hybrid(*v, "hybrid", c.hybrid);

  if (const json* sw = find(root, "sweep")) {
    check_keys(*sw, "sweep", {"sizes"});
    const json* sizes = find(*sw, "sizes");
    if (sizes == nullptr || !sizes->is_array() || sizes->empty()) fail("sweep.sizes", "expected a non-empty array");
    for (std::size_t i = 0; i < sizes->size(); ++i) {
      const auto q = read_integer((*sizes)[i], "sweep.sizes[" + std::to_string(i) + "]");
      if (q < 1) fail("sweep.sizes[" + std::to_string(i) + "]", "must be at least 1");
      c.sweep_sizes.push_back(static_cast<Index>(q));
    }
  }

  if (const json* ss = find(root, "snapshot_study")) {
    if (c.model != "euler") fail("snapshot_study", "only defined for the euler model");
    check_keys(*ss, "snapshot_study", {"basis_mu", "basis_size", "snapshot_mu", "snapshot_step", "bound_factor"});
    SnapshotStudyConfig& s = c.snapshot;
    if (const json* v = find(*ss, "basis_mu")) s.basis_mu = read_point(*v, "snapshot_study.basis_mu", 2);
    if (const json* v = find(*ss, "snapshot_mu")) s.snapshot_mu = read_point(*v, "snapshot_study.snapshot_mu", 2);
    if (const json* v = find(*ss, "basis_size")) {
      const auto q = read_integer(*v, "snapshot_study.basis_size");
      if (q < 1) fail("snapshot_study.basis_size", "must be at least 1");
      s.basis_size = static_cast<Index>(q);
    }
    if (const json* v = find(*ss, "snapshot_step")) {
      const auto n = read_integer(*v, "snapshot_study.snapshot_step");
      if (n < 0 || n > c.steps) fail("snapshot_study.snapshot_step", "must lie in [0, scheme.steps]");
      s.snapshot_step = static_cast<int>(n);
    }
    if (const json* v = find(*ss, "bound_factor")) {
      s.bound_factor = read_number(*v, "snapshot_study.bound_factor");
      if (!(s.bound_factor > 0.0)) fail("snapshot_study.bound_factor", "must be positive");
    }
  }

  const json* out = find(root, "output");
  if (out == nullptr) fail("output", "required key is missing");
  c.output = read_string(*out, "output");
  if (c.output.empty()) fail("output", "must not be empty");

  if (const json* v = find(root, "seed")) {
    const auto seed = read_integer(*v, "seed");
    if (seed < 0) fail("seed", "must be non-negative");
    c.seed = static_cast<std::uint64_t>(seed);
  }
  return c;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open configuration file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_config_text(buffer.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Setup

Setup make_setup(const ExperimentConfig& config) {
  std::shared_ptr<const FullOrderModel> model;
  FieldLayout layout;
  std::optional<Matrix> c;
  if (config.model == "burgers") {
    auto m = std::make_shared<BurgersModel>(config.model_size.value_or(200), 100.0, config.final_time.value_or(30.0));
    layout = FieldLayout::single(m->dim(), "u");
    c = Matrix::Ones(1, m->dim());
    model = m;
  } else if (config.model == "euler") {
    auto m = std::make_shared<EulerModel>(config.model_size.value_or(100), 1.25, config.final_time.value_or(1e-3));
    layout = m->layout();
    model = m;
  } else {
    auto m = std::make_shared<DiffusionModel>(config.model_size.value_or(33), config.final_time.value_or(1e4));
    layout = FieldLayout::single(m->dim(), "theta");
    // The default matrix needs a 100-entry overlap; smaller grids only get one on request.
    if (config.constraints.rsum || (m->dim() + 1) / 2 >= 50) c = m->rsum_matrix();
    model = m;
  }
  const Index n = model->dim();
  if (config.constraints.rsum) {
    const RsumSpec& r = *config.constraints.rsum;
    if (r.kind == RsumSpec::Kind::ones) {
      c = Matrix::Ones(1, n);
    } else if (r.kind == RsumSpec::Kind::rows) {
      c = Matrix::Zero(static_cast<Index>(r.ranges.size()), n);
      for (std::size_t i = 0; i < r.ranges.size(); ++i) {
        const auto [b, e] = r.ranges[i];
        if (e > n) fail("constraints.rsum.matrix[" + std::to_string(i) + "]", "range exceeds the state dimension");
        c->row(static_cast<Index>(i)).segment(b, e - b).setOnes();
      }
    }
  }
  for (const auto& mu : config.training) model->check_params(mu);
  const LinearMultistepScheme scheme = config.scheme == "backward_euler"
                                          ? LinearMultistepScheme::backward_euler(model->final_time(), config.steps)
                                          : LinearMultistepScheme::explicit_euler(model->final_time(), config.steps);
  Setup s{model, scheme, layout, c, false, false};
  s.tv_metric = config.model == "burgers" || config.constraints.tvd;
  s.energy_metric = config.model == "diffusion";
  return s;
}

ReferenceState make_reference(const ExperimentConfig& config, const Setup& setup) {
  if (config.reference == ReferencePolicy::zero) return ReferenceState::zero(setup.model->dim());
  return ReferenceState::initial_condition(setup.model);
}

ConstraintSet make_constraints(const ExperimentConfig& config, const Setup& setup,
                               const std::vector<std::string>& combination, const std::vector<double>& tvb_bounds) {
  ConstraintSet set;
  for (const auto& name : combination) {
    if (name == "rsum") {
      require(setup.rsum_matrix.has_value(), "make_constraints: no rsum matrix for this model");
      set.dyn_eq.push_back(std::make_shared<RsumConstraint>(setup.model, *setup.rsum_matrix));
    } else if (name == "tvd") {
      set.dyn_ineq.push_back(std::make_shared<TvdConstraint>(setup.layout));
    } else if (name == "tvb") {
      require(tvb_bounds.size() == setup.layout.size(), "make_constraints: one tvb bound per field is required");
      set.kin_ineq.push_back(std::make_shared<TvbConstraint>(setup.layout, tvb_bounds));
    } else if (name == "ec") {
      const Index n = setup.model->dim();
      set.dyn_eq.push_back(std::make_shared<EnergyConstraint>(
          [n](const Vector&) { return Vector::Ones(n).eval(); },
          [](double, const ParamVector& mu) { return DiffusionModel::scaled_energy_source(mu); }));
    } else {
      throw ContractViolation("make_constraints: unknown constraint '" + name + "'");
    }
  }
  (void)config;
  return set;
}

std::string combination_label(const ConstraintSpec& spec, const std::vector<std::string>& combination) {
  const std::vector<std::string> declared = spec.declared();
  if (declared.empty()) return "none";
  std::string out;
  for (const auto& d : declared) {
    if (!out.empty()) out += "_";
    const bool on = std::find(combination.begin(), combination.end(), d) != combination.end();
    out += d + (on ? "1" : "0");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output helpers

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch == '\n' ? ' ' : ch;
  }
  return out + "\"";
}

class Csv {
 public:
  Csv(const fs::path& path, RunArtifacts& artifacts) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    artifacts.files.push_back(path.string());
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

void write_text(const fs::path& path, const std::string& text, RunArtifacts& artifacts) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  artifacts.files.push_back(path.string());
}

fs::path prepare_dir(const fs::path& dir) {
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> mu_cells(const ParamVector& mu) {
  std::vector<std::string> out;
  for (Index i = 0; i < mu.size(); ++i) out.push_back(fmt(mu[i]));
  return out;
}

std::vector<std::string> mu_header(Index dim) {
  std::vector<std::string> out;
  for (Index i = 1; i <= dim; ++i) out.push_back("mu_" + std::to_string(i));
  return out;
}

TrajectorySolution fom_or_throw(const Setup& setup, const ParamVector& mu, const NewtonOptions& newton) {
  TrajectorySolution sol = solve_fom(*setup.model, setup.scheme, mu, newton);
  if (!sol.completed) throw NumericalFailure("FOM at mu = " + mu.to_string() + " failed: " + sol.message);
  return sol;
}

const fs::path kBasisFile = "basis.bin";
const fs::path kTrainingTvFile = "training_tv.csv";

std::vector<double> read_training_tv(const fs::path& path, const FieldLayout& layout) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string() + "; run the offline stage first");
  std::string line;
  std::getline(in, line);
  std::vector<double> out;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("malformed line in " + path.string());
    out.push_back(std::stod(line.substr(comma + 1)));
  }
  if (out.size() != layout.size()) throw std::runtime_error(path.string() + " does not match the model fields");
  return out;
}

MetricSeries field_tv_series(const std::vector<Vector>& decoded, const FieldLayout::Field& f) {
  MetricSeries s{"tv_" + f.name, {}, 0.0};
  for (std::size_t n = 1; n < decoded.size(); ++n) s.values.push_back(total_variation(decoded[n].segment(f.offset, f.length)));
  s.global = mean_aggregate(s.values);
  return s;
}

std::vector<MetricSeries> compute_metrics(const Setup& setup, const RomConfig& rom_config, const ReducedTrajectory& rom,
                                          const TrajectorySolution& fom, const ParamVector& mu,
                                          const std::vector<double>& tvb_bounds) {
  const Vector x_ref = rom_config.x_ref(mu);
  std::vector<MetricSeries> out;
  out.push_back(state_error_series(fom, rom, rom_config.basis, x_ref));
  if (setup.rsum_matrix)
    out.push_back(rsum_violation_series(rom_config.kind, *setup.model, rom_config, rom, *setup.rsum_matrix, mu));
  if (setup.tv_metric) out.push_back(tv_violation_series(rom, rom_config.basis, x_ref));
  if (setup.layout.size() > 1) {
    const std::vector<Vector> decoded = decode_trajectory(rom, rom_config.basis, x_ref);
    for (const auto& f : setup.layout.fields()) out.push_back(field_tv_series(decoded, f));
  }
  if (!tvb_bounds.empty()) {
    auto tvb = tvb_violation_series(rom, rom_config.basis, x_ref, tvb_bounds, setup.layout);
    for (auto& s : tvb) out.push_back(std::move(s));
  }
  if (setup.energy_metric) {
    const auto* diffusion = dynamic_cast<const DiffusionModel*>(setup.model.get());
    require(diffusion != nullptr, "energy metric needs the diffusion model");
    out.push_back(energy_deviation_series(rom, rom_config.basis, x_ref,
                                          [diffusion](const Vector& x) { return diffusion->energy(x); },
                                          setup.model->initial_state(mu)));
  }
  return out;
}

void write_metrics(const fs::path& dir, const ReducedTrajectory& rom, const std::vector<MetricSeries>& metrics,
                   RunArtifacts& artifacts) {
  Csv csv(dir / "metrics.csv", artifacts);
  std::vector<std::string> header{"step", "time"};
  for (const auto& m : metrics) header.push_back(m.name);
  csv.row(header);
  const std::size_t rows = rom.coords.empty() ? 0 : rom.coords.size() - 1;
  for (std::size_t n = 1; n <= rows; ++n) {
    std::vector<std::string> row{std::to_string(n), fmt(rom.times[n])};
    for (const auto& m : metrics) row.push_back(n - 1 < m.values.size() ? fmt(m.values[n - 1]) : "nan");
    csv.row(row);
  }
}

void write_diagnostics(const fs::path& dir, const ReducedTrajectory& rom, RunArtifacts& artifacts) {
  Csv csv(dir / "diagnostics.csv", artifacts);
  csv.row({"step", "iterations", "inner_solves", "max_inner_iterations", "status", "objective", "kkt_stationarity",
           "kkt_feasibility_eq", "kkt_feasibility_ineq", "kkt_complementarity", "root_residual", "active_constraints"});
  for (std::size_t i = 0; i < rom.diagnostics.size(); ++i) {
    const RomStepDiagnostics& d = rom.diagnostics[i];
    csv.row({std::to_string(i + 1), std::to_string(d.iterations), std::to_string(d.inner_solves),
             std::to_string(d.max_inner_iterations), d.status, fmt(d.objective), fmt(d.kkt_stationarity),
             fmt(d.kkt_feasibility_eq), fmt(d.kkt_feasibility_ineq), fmt(d.kkt_complementarity), fmt(d.root_residual),
             std::to_string(d.active_constraints)});
  }
}

/// One online pass with a given basis; `root` receives mu<i>/<projection>_<label>/.
void online_pass(const ExperimentConfig& config, const Setup& setup, const ReducedBasis& basis,
                 const std::vector<double>& training_tv, const fs::path& root, RunArtifacts& artifacts,
                 std::ofstream& log) {
  std::vector<double> tvb_bounds;
  if (config.constraints.tvb_factor)
    for (double tv : training_tv) tvb_bounds.push_back(*config.constraints.tvb_factor * tv);
  const ReferenceState reference = make_reference(config, setup);

  for (std::size_t i = 0; i < config.online.size(); ++i) {
    const ParamVector& mu = config.online[i];
    const std::string mu_dir = "mu" + std::to_string(i);
    std::optional<TrajectorySolution> fom;
    std::string fom_error;
    try {
      fom = fom_or_throw(setup, mu, config.newton);
    } catch (const std::exception& e) {
      fom_error = e.what();
    }
    for (ProjectionKind kind : config.projections) {
      for (const auto& combo : config.combinations) {
        RunRecord rec;
        rec.mu = mu;
        rec.projection = kind;
        rec.combination = combination_label(config.constraints, combo);
        rec.basis_size = basis.p();
        const fs::path dir = prepare_dir(root / mu_dir / (std::string(to_string(kind)) + "_" + rec.combination));
        rec.directory = dir.string();
        if (!fom) {
          rec.message = "reference " + fom_error;
        } else {
          RomConfig rc{basis, reference, setup.scheme, make_constraints(config, setup, combo, tvb_bounds), kind,
                       config.solver, config.hybrid, config.newton};
          try {
            rc.validate(*setup.model);
            const ReducedTrajectory rom = simulate_rom(*setup.model, rc, mu);
            rec.completed = rom.completed;
            rec.failed_step = rom.failed_step;
            rec.message = rom.message;
            rec.metrics = compute_metrics(setup, rc, rom, *fom, mu, tvb_bounds);
            write_metrics(dir, rom, rec.metrics, artifacts);
            write_diagnostics(dir, rom, artifacts);
          } catch (const std::exception& e) {
            rec.completed = false;
            rec.message = e.what();
          }
        }
        log << mu_dir << " " << to_string(kind) << " " << rec.combination << " p=" << basis.p() << ": "
            << (rec.completed ? "completed" : "FAILED " + rec.message) << '\n';
        if (!rec.completed) {
          std::ostringstream status;
          status << "completed=false\nfailed_step=" << rec.failed_step << "\nmessage=" << rec.message << '\n';
          write_text(dir / "status.txt", status.str(), artifacts);
          artifacts.all_completed = false;
        }
        artifacts.runs.push_back(std::move(rec));
      }
    }
  }
}

void write_summary(const fs::path& path, const ExperimentConfig& config, const std::vector<RunRecord>& runs,
                   RunArtifacts& artifacts) {
  Csv csv(path, artifacts);
  std::vector<std::string> metric_names;
  for (const auto& r : runs)
    if (!r.metrics.empty()) {
      for (const auto& m : r.metrics) metric_names.push_back(m.name);
      break;
    }
  const Index dim = config.online.empty() ? 0 : config.online.front().size();
  std::vector<std::string> header{"p"};
  for (const auto& h : mu_header(dim)) header.push_back(h);
  for (const char* h : {"projection", "constraints", "completed", "failed_step"}) header.emplace_back(h);
  for (const auto& m : metric_names) header.push_back("global_" + m);
  header.emplace_back("message");
  csv.row(header);
  for (const auto& r : runs) {
    std::vector<std::string> row{std::to_string(r.basis_size)};
    for (const auto& c : mu_cells(r.mu)) row.push_back(c);
    row.emplace_back(to_string(r.projection));
    row.push_back(r.combination);
    row.emplace_back(r.completed ? "1" : "0");
    row.push_back(std::to_string(r.failed_step));
    for (std::size_t k = 0; k < metric_names.size(); ++k)
      row.push_back(k < r.metrics.size() ? fmt(r.metrics[k].global) : "nan");
    row.push_back(quote(r.message));
    csv.row(row);
  }
}

ReducedBasis load_truncated(const fs::path& out, Index p) {
  const ReducedBasis stored = load_basis((out / kBasisFile).string());
  if (p > stored.p())
    throw ContractViolation("basis size " + std::to_string(p) + " exceeds the stored basis (" +
                            std::to_string(stored.p()) + " modes); rerun offline with a larger size");
  return stored.truncate(p);
}

}  // namespace

// ---------------------------------------------------------------------------
// Operations

RunArtifacts run_fom(const ExperimentConfig& config) {
  const Setup setup = make_setup(config);
  RunArtifacts artifacts;
  const fs::path root = prepare_dir(fs::path(config.output) / "fom");
  for (std::size_t i = 0; i < config.online.size(); ++i) {
    const ParamVector& mu = config.online[i];
    const fs::path dir = prepare_dir(root / ("mu" + std::to_string(i)));
    const TrajectorySolution sol = solve_fom(*setup.model, setup.scheme, mu, config.newton);
    {
      Csv csv(dir / "states.csv", artifacts);
      std::vector<std::string> header{"step", "time"};
      for (Index k = 0; k < setup.model->dim(); ++k) header.push_back("x_" + std::to_string(k));
      csv.row(header);
      for (std::size_t n = 0; n < sol.states.size(); ++n) {
        std::vector<std::string> row{std::to_string(n), fmt(sol.times[n])};
        for (Index k = 0; k < sol.states[n].size(); ++k) row.push_back(fmt(sol.states[n][k]));
        csv.row(row);
      }
    }
    {
      Csv csv(dir / "diagnostics.csv", artifacts);
      csv.row({"step", "iterations", "residual_norm", "converged"});
      for (std::size_t n = 0; n < sol.diagnostics.size(); ++n) {
        const StepDiagnostics& d = sol.diagnostics[n];
        csv.row({std::to_string(n + 1), std::to_string(d.iterations), fmt(d.residual_norm), d.converged ? "1" : "0"});
      }
    }
    RunRecord rec;
    rec.directory = dir.string();
    rec.mu = mu;
    rec.completed = sol.completed;
    rec.failed_step = sol.failed_step;
    rec.message = sol.message;
    if (!sol.completed) {
      write_text(dir / "status.txt",
                 "completed=false\nfailed_step=" + std::to_string(sol.failed_step) + "\nmessage=" + sol.message + "\n",
                 artifacts);
      artifacts.all_completed = false;
    }
    artifacts.runs.push_back(std::move(rec));
  }
  return artifacts;
}

RunArtifacts run_offline(const ExperimentConfig& config) {
  const Setup setup = make_setup(config);
  const ReferenceState reference = make_reference(config, setup);
  RunArtifacts artifacts;
  const fs::path out = prepare_dir(config.output);
  std::ofstream log(out / "offline.log");
  artifacts.files.push_back((out / "offline.log").string());

  SnapshotMatrix snapshots;
  std::vector<double> max_tv(setup.layout.size(), 0.0);
  Csv manifest(out / "snapshots.csv", artifacts);
  {
    std::vector<std::string> header{"run"};
    for (const auto& h : mu_header(setup.model->param_dim())) header.push_back(h);
    header.emplace_back("columns");
    manifest.row(header);
  }
  for (std::size_t i = 0; i < config.training.size(); ++i) {
    const ParamVector& mu = config.training[i];
    TrajectorySolution sol;
    try {
      sol = fom_or_throw(setup, mu, config.newton);
    } catch (const std::exception& e) {
      log << "training run " << i << ": " << e.what() << '\n';
      throw;
    }
    snapshots.append_run(sol, reference(mu));
    for (std::size_t n = 1; n < sol.states.size(); ++n)
      for (std::size_t f = 0; f < setup.layout.size(); ++f) {
        const auto& field = setup.layout[f];
        max_tv[f] = std::max(max_tv[f], total_variation(sol.states[n].segment(field.offset, field.length)));
      }
    std::vector<std::string> row{std::to_string(i)};
    for (const auto& c : mu_cells(mu)) row.push_back(c);
    row.push_back(std::to_string(sol.states.size() - 1));
    manifest.row(row);
    log << "training run " << i << " mu = " << mu.to_string() << ": " << sol.states.size() - 1 << " snapshots\n";
  }

  Index p = config.basis_size;
  for (Index q : config.sweep_sizes) p = std::max(p, q);
  const ReducedBasis basis = pod(snapshots, p);
  save_basis((out / kBasisFile).string(), basis);
  artifacts.files.push_back((out / kBasisFile).string());
  log << "basis: " << basis.n() << " x " << basis.p() << " from " << snapshots.cols() << " snapshots\n";

  {
    Csv csv(out / "singular_values.csv", artifacts);
    csv.row({"index", "singular_value"});
    const Vector s = snapshot_singular_values(snapshots);
    for (Index k = 0; k < s.size(); ++k) csv.row({std::to_string(k + 1), fmt(s[k])});
  }
  {
    Csv csv(out / kTrainingTvFile, artifacts);
    csv.row({"field", "max_total_variation"});
    for (std::size_t f = 0; f < setup.layout.size(); ++f) csv.row({setup.layout[f].name, fmt(max_tv[f])});
  }
  return artifacts;
}

RunArtifacts run_online(const ExperimentConfig& config) {
  const Setup setup = make_setup(config);
  const fs::path out(config.output);
  const ReducedBasis basis = load_truncated(out, config.basis_size);
  const std::vector<double> training_tv =
      config.constraints.tvb_factor ? read_training_tv(out / kTrainingTvFile, setup.layout) : std::vector<double>{};
  RunArtifacts artifacts;
  const fs::path root = prepare_dir(out / "online");
  std::ofstream log(root / "online.log");
  artifacts.files.push_back((root / "online.log").string());
  online_pass(config, setup, basis, training_tv, root, artifacts, log);
  write_summary(root / "summary.csv", config, artifacts.runs, artifacts);
  return artifacts;
}

RunArtifacts run_sweep(const ExperimentConfig& config) {
  require(!config.sweep_sizes.empty(), "run_sweep: sweep.sizes is empty");
  const Setup setup = make_setup(config);
  const fs::path out(config.output);
  const std::vector<double> training_tv =
      config.constraints.tvb_factor ? read_training_tv(out / kTrainingTvFile, setup.layout) : std::vector<double>{};
  RunArtifacts artifacts;
  const fs::path root = prepare_dir(out / "sweep");
  std::ofstream log(root / "sweep.log");
  artifacts.files.push_back((root / "sweep.log").string());
  for (Index p : config.sweep_sizes) {
    const ReducedBasis basis = load_truncated(out, p);
    online_pass(config, setup, basis, training_tv, prepare_dir(root / ("p" + std::to_string(p))), artifacts, log);
  }
  write_summary(root / "summary.csv", config, artifacts.runs, artifacts);
  return artifacts;
}

RunArtifacts run_snapshot_projection_study(const ExperimentConfig& config) {
  require(config.model == "euler", "run_snapshot_projection_study: needs the euler model");
  const Setup setup = make_setup(config);
  const ReferenceState reference = make_reference(config, setup);
  const SnapshotStudyConfig& s = config.snapshot;
  if (s.snapshot_step > config.steps) throw ConfigError("snapshot_study.snapshot_step: exceeds scheme.steps");
  RunArtifacts artifacts;
  const fs::path dir = prepare_dir(fs::path(config.output) / "snapshot");

  const TrajectorySolution train = fom_or_throw(setup, s.basis_mu, config.newton);
  SnapshotMatrix snapshots;
  snapshots.append_run(train, reference(s.basis_mu));
  const ReducedBasis basis = pod(snapshots, s.basis_size);

  const TrajectorySolution target_run = fom_or_throw(setup, s.snapshot_mu, config.newton);
  const Vector& x = target_run.states.at(static_cast<std::size_t>(s.snapshot_step));
  const Vector x_ref = reference(s.snapshot_mu);
  const FieldLayout& layout = setup.layout;

  std::vector<double> bounds;
  for (const auto& f : layout.fields()) bounds.push_back(s.bound_factor * total_variation(x.segment(f.offset, f.length)));

  const Vector orthogonal = decode(basis, x_ref, encode(basis, x_ref, x));
  const NlpResult constrained_result = project_snapshot_constrained(basis, x_ref, x, layout, bounds, config.solver);
  const Vector constrained = decode(basis, x_ref, constrained_result.point);

  Csv errors(dir / "errors.csv", artifacts);
  errors.row({"method", "field", "relative_error", "total_variation", "bound", "tvb_violation"});
  for (const auto& [name, approx] : {std::pair<std::string, const Vector*>{"orthogonal", &orthogonal},
                                     std::pair<std::string, const Vector*>{"constrained", &constrained}}) {
    RunRecord rec;
    rec.directory = dir.string();
    rec.mu = s.snapshot_mu;
    rec.combination = name;
    rec.basis_size = basis.p();
    rec.completed = name == "orthogonal" || constrained_result.usable();
    rec.message = name == "orthogonal" ? "" : to_string(constrained_result.status);
    const std::vector<double> fe = field_relative_errors(x, *approx, layout);
    for (std::size_t f = 0; f < layout.size(); ++f) {
      const auto& field = layout[f];
      const double tv = total_variation(approx->segment(field.offset, field.length));
      const double violation = std::max(0.0, tv - bounds[f]);
      errors.row({name, field.name, fmt(fe[f]), fmt(tv), fmt(bounds[f]), fmt(violation)});
      rec.metrics.push_back({"error_" + field.name, {fe[f]}, fe[f]});
      rec.metrics.push_back({"tvb_" + field.name, {violation}, violation});
    }
    const double total = relative_error(x, *approx);
    errors.row({name, "total", fmt(total), "", "", ""});
    rec.metrics.push_back({"error_total", {total}, total});
    if (!rec.completed) artifacts.all_completed = false;
    artifacts.runs.push_back(std::move(rec));
  }

  Csv profiles(dir / "profiles.csv", artifacts);
  profiles.row({"field", "node", "fom", "orthogonal", "constrained"});
  for (const auto& f : layout.fields())
    for (Index k = 0; k < f.length; ++k)
      profiles.row({f.name, std::to_string(k + 1), fmt(x[f.offset + k]), fmt(orthogonal[f.offset + k]),
                    fmt(constrained[f.offset + k])});

  std::ostringstream status;
  status << "solver_status=" << to_string(constrained_result.status) << "\niterations=" << constrained_result.iterations
         << "\nobjective=" << fmt(constrained_result.objective)
         << "\nkkt_stationarity=" << fmt(constrained_result.kkt_stationarity)
         << "\nkkt_feasibility_ineq=" << fmt(constrained_result.kkt_feasibility_ineq)
         << "\nkkt_complementarity=" << fmt(constrained_result.kkt_complementarity) << '\n';
  write_text(dir / "status.txt", status.str(), artifacts);
  return artifacts;
}

}  // namespace cgrom::harness
