#include "kdisc/experiment.hpp"

#include "kdisc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace kdisc {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

json selector(const std::string& name) { return json{{"name", name}}; }

double sqrt2() { return std::sqrt(2.0); }

} // namespace

std::vector<std::string> kernel_names() {
  return {"constant",     "bounded_confidence", "attraction_repulsion", "cucker_smale",      "power_law_2d",
          "pair_decay",   "opinion_local",      "anisotropic_first",    "anisotropic_second", "piecewise"};
}

ScalarFn kernel_from_json(const json& sel) {
  if (!sel.is_object() || !sel.contains("name")) throw ConfigError("kernel selector needs a 'name'");
  const auto name = sel["name"].get<std::string>();
  try {
    if (name == "constant") {
      reject_unknown(sel, {"name", "value"}, "kernel constant");
      return kernels::constant(sel.at("value").get<double>());
    }
    if (name == "bounded_confidence") {
      reject_unknown(sel, {"name", "tau"}, "kernel bounded_confidence");
      return kernels::bounded_confidence(sel.at("tau").get<double>());
    }
    if (name == "piecewise") {
      reject_unknown(sel, {"name", "nodes", "values"}, "kernel piecewise");
      return kernels::piecewise_linear(sel.at("nodes").get<std::vector<double>>(),
                                       sel.at("values").get<std::vector<double>>());
    }
    reject_unknown(sel, {"name"}, "kernel " + name);
    if (name == "attraction_repulsion") return kernels::attraction_repulsion();
    if (name == "cucker_smale") return kernels::cucker_smale();
    if (name == "power_law_2d") return kernels::power_law_2d();
    if (name == "pair_decay") return kernels::pair_decay();
    if (name == "opinion_local") return kernels::opinion_local();
    if (name == "anisotropic_first") return kernels::anisotropic_first();
    if (name == "anisotropic_second") return kernels::anisotropic_second();
  } catch (const json::exception& e) {
    throw ConfigError("kernel " + name + ": " + e.what());
  }
  throw ConfigError("unknown kernel '" + name + "'");
}

KernelSpec ExperimentConfig::kernels() const {
  KernelSpec spec;
  spec.drift = kernel_from_json(drift);
  spec.mode = mode;
  if (mode == DiffusionMode::local_state) {
    if (local.empty()) throw ConfigError("local_state diffusion needs at least one 'local' kernel");
    for (const auto& s : local) spec.local.push_back(kernel_from_json(s));
    if (spec.local.size() != 1 && spec.local.size() != static_cast<std::size_t>(sim.dim))
      throw ConfigError("give one local diffusion kernel or one per component");
  } else {
    spec.diffusion = kernel_from_json(diffusion);
  }
  return spec;
}

void ExperimentConfig::validate() const {
  sim.validate(scheme);
  (void)kernels();
  if (discovery.mode != mode) throw ConfigError("discovery diffusion_mode must match the kernels' diffusion_mode");
}

json to_json(const ExperimentConfig& c) {
  json sim{{"n_agents", c.sim.n_agents},
           {"dim", c.sim.dim},
           {"dt", c.sim.dt},
           {"snapshots", c.sim.snapshots},
           {"batch_size", c.sim.batch_size},
           {"seed", c.sim.seed},
           {"initial_law", {{"lo", c.sim.initial_law.lo}, {"hi", c.sim.initial_law.hi}}},
           {"domain_half_width", c.sim.domain_half_width ? json(*c.sim.domain_half_width) : json(nullptr)},
           {"scheme", std::string(to_string(c.scheme))}};
  json kern{{"drift", c.drift}, {"diffusion_mode", std::string(to_string(c.mode))}};
  if (c.mode == DiffusionMode::local_state) kern["local"] = c.local;
  else kern["diffusion"] = c.diffusion;
  return {{"name", c.name},
          {"simulation", sim},
          {"kernels", kern},
          {"discovery", to_json(c.discovery)},
          {"validation_seed", c.validation_seed}};
}

ExperimentConfig experiment_from_json(const json& doc) {
  reject_unknown(doc, {"name", "simulation", "kernels", "discovery", "validation_seed"}, "experiment");
  ExperimentConfig c;
  try {
    c.name = doc.value("name", c.name);
    if (doc.contains("simulation")) {
      const auto& s = doc["simulation"];
      reject_unknown(s, {"n_agents", "dim", "dt", "snapshots", "batch_size", "seed", "initial_law",
                         "domain_half_width", "scheme"},
                     "simulation");
      c.sim.n_agents = s.value("n_agents", c.sim.n_agents);
      c.sim.dim = s.value("dim", c.sim.dim);
      c.sim.dt = s.value("dt", c.sim.dt);
      c.sim.snapshots = s.value("snapshots", c.sim.snapshots);
      c.sim.batch_size = s.value("batch_size", c.sim.batch_size);
      c.sim.seed = s.value("seed", c.sim.seed);
      if (s.contains("initial_law")) {
        reject_unknown(s["initial_law"], {"lo", "hi"}, "initial_law");
        c.sim.initial_law.lo = s["initial_law"].value("lo", c.sim.initial_law.lo);
        c.sim.initial_law.hi = s["initial_law"].value("hi", c.sim.initial_law.hi);
      }
      if (s.contains("domain_half_width") && !s["domain_half_width"].is_null())
        c.sim.domain_half_width = s["domain_half_width"].get<double>();
      if (s.contains("scheme")) c.scheme = parse_scheme(s["scheme"].get<std::string>());
    }
    if (doc.contains("kernels")) {
      const auto& k = doc["kernels"];
      reject_unknown(k, {"drift", "diffusion_mode", "diffusion", "local"}, "kernels");
      if (k.contains("drift")) c.drift = k["drift"];
      if (k.contains("diffusion_mode")) c.mode = parse_diffusion_mode(k["diffusion_mode"].get<std::string>());
      if (k.contains("diffusion")) c.diffusion = k["diffusion"];
      if (k.contains("local")) c.local = k["local"].get<std::vector<json>>();
    }
    c.discovery.mode = c.mode;
    if (doc.contains("discovery")) {
      json d = doc["discovery"];
      if (d.is_object() && !d.contains("diffusion_mode")) d["diffusion_mode"] = std::string(to_string(c.mode));
      c.discovery = discovery_config_from_json(d);
    }
    c.validation_seed = doc.value("validation_seed", c.validation_seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return experiment_from_json(doc);
}

Scale parse_scale(std::string_view name) {
  if (name == "desk") return Scale::desk;
  if (name == "paper") return Scale::paper;
  throw ConfigError("unknown scale '" + std::string(name) + "' (expected desk or paper)");
}

std::string_view to_string(Scale scale) { return scale == Scale::desk ? "desk" : "paper"; }

std::vector<Setting> paper_settings() { return {{1, 100, 1}, {2, 50, 2}, {3, 25, 4}}; }

std::vector<std::string> preset_ids() { return {"known_S", "1", "2", "3", "4", "5"}; }

std::vector<int> preset_settings(std::string_view test_id) {
  if (test_id == "known_S") return {};
  if (test_id == "5") return {3};
  return {1, 2, 3};
}

std::vector<Regime> preset_regimes(std::string_view test_id) {
  if (test_id == "known_S") return {Regime::known_S};
  return {Regime::batch, Regime::mean_field};
}

ExperimentConfig preset(std::string_view test_id, Scale scale, int setting, Regime regime) {
  const auto ids = preset_ids();
  if (std::find(ids.begin(), ids.end(), test_id) == ids.end())
    throw ConfigError("unknown test id '" + std::string(test_id) + "' (expected known_S, 1, 2, 3, 4 or 5)");
  Setting window{};
  bool found = false;
  for (const auto& s : paper_settings())
    if (s.id == setting) {
      window = s;
      found = true;
    }
  if (!found) throw ConfigError("setting must be 1, 2 or 3");

  ExperimentConfig c;
  c.name = "test_" + std::string(test_id);
  c.sim.n_agents = scale == Scale::desk ? 20000 : 100000;
  c.sim.dim = 1;
  c.sim.dt = 0.01;
  c.sim.snapshots = 201;
  c.sim.seed = 20240101;
  c.sim.initial_law = {-1.0, 1.0};
  c.scheme = Scheme::binary;
  c.validation_seed = 777;

  DiscoveryConfig& d = c.discovery;
  d.regime = regime;
  d.ensemble = scale == Scale::desk ? 5 : 10;
  d.batch_size = scale == Scale::desk ? 20 : 1000;
  d.drift_snapshots = window.snapshots;
  d.drift_stride = window.stride;
  d.density = {-1.0, 1.0, 100};
  d.seed = 99;

  auto local_opinion = [&] {
    c.mode = DiffusionMode::local_state;
    c.local = {selector("opinion_local")};
    d.diff_interval = {-1.0, 1.0};
    d.diff_basis_size = 15;
    d.diff_anchors = {{0, 0.0}, {14, 0.0}};
    d.diff_snapshots = 10;
    d.diff_stride = 1;
  };

  if (test_id == "known_S") {
    c.drift = selector("cucker_smale");
    c.mode = DiffusionMode::pairwise_radial_displacement;
    c.diffusion = selector("pair_decay");
    d.regime = Regime::known_S;
    d.drift_basis_size = 10;
    d.diff_basis_size = 8;
    d.drift_snapshots = 20;
    d.drift_stride = 1;
    d.diff_snapshots = 10;
    d.diff_stride = 1;
    d.drift_anchor = 1.0;
    d.drift_monotonicity = -1;
  } else if (test_id == "1") {
    c.sim.dt = 0.05;
    c.drift = json{{"name", "bounded_confidence"}, {"tau", 0.5}};
    d.drift_basis_size = 21;
    d.drift_anchor = 1.0;
    d.drift_monotonicity = -1;
    local_opinion();
  } else if (test_id == "2") {
    c.sim.dt = 0.05;
    c.drift = selector("attraction_repulsion");
    d.drift_basis_size = 8;
    d.drift_anchor = -1.0;
    d.drift_monotonicity = 1;
    local_opinion();
  } else if (test_id == "3") {
    c.drift = selector("cucker_smale");
    c.mode = DiffusionMode::pairwise_radial_displacement;
    c.diffusion = selector("pair_decay");
    d.drift_basis_size = 10;
    d.diff_basis_size = 8;
    d.drift_anchor = 1.0;
    d.drift_monotonicity = -1;
    // D_hat(0)^2 = 2 zeta_0 must equal D(0)^2 = 0.25^2.
    d.diff_anchors = {{0, 0.25 * 0.25 / 2.0}};
    d.diff_monotonicity = 0;
    if (regime == Regime::batch) {
      d.diff_snapshots = window.snapshots;
      d.diff_stride = window.stride;
    } else {
      d.diff_snapshots = 10;
      d.diff_stride = 1;
    }
  } else if (test_id == "4") {
    c.sim.dim = 2;
    c.sim.initial_law = {-0.85, 0.85};
    c.drift = selector("power_law_2d");
    c.mode = DiffusionMode::local_state;
    c.local = {selector("anisotropic_first"), selector("anisotropic_second")};
    d.drift_basis_size = 10;
    d.drift_interval = {0.0, 2.0 * sqrt2()};
    d.drift_anchor = -7.0;
    d.drift_monotonicity = 1;
    d.diff_interval = {-1.0, 1.0};
    d.diff_basis_size = 15;
    d.diff_anchors = {{0, 0.0}, {14, 0.0}};
    d.diff_snapshots = 20;
    d.diff_stride = 1;
    d.density = {-1.0, 1.0, 50};
  } else {  // "5"
    c.sim.dim = 2;
    c.drift = json{{"name", "bounded_confidence"}, {"tau", 1.0}};
    c.mode = DiffusionMode::pairwise_radial_displacement;
    c.diffusion = selector("cucker_smale");
    d.drift_basis_size = 21;
    d.drift_interval = {0.0, 2.0 * sqrt2()};
    d.drift_anchor = 1.0;
    d.drift_monotonicity = -1;
    d.diff_basis_size = 10;
    d.diff_interval = {0.0, 2.0 * sqrt2()};
    d.diff_anchors = {{0, 0.5}};
    d.diff_monotonicity = -1;
    d.diff_snapshots = window.snapshots;
    d.diff_stride = window.stride;
    d.density = {-1.0, 1.0, 50};
  }
  d.mode = c.mode;
  c.validate();
  return c;
}

} // namespace kdisc
