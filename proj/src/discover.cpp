#include "kdisc/discover.hpp"

#include "kdisc/errors.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <string>

namespace kdisc {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::size_t channel_count(const DiscoveryConfig& config, const TrajectoryDataset& data) {
  return config.mode == DiffusionMode::local_state ? static_cast<std::size_t>(data.dim) : 1;
}

BasisFamily drift_basis(const DiscoveryConfig& c) {
  return BasisFamily::make(c.drift_interval.lo, c.drift_interval.hi, c.drift_basis_size, c.drift_mesh);
}

BasisFamily diff_basis(const DiscoveryConfig& c) {
  return BasisFamily::make(c.diff_interval.lo, c.diff_interval.hi, c.diff_basis_size, c.diff_mesh);
}

AssemblyOptions drift_options(const DiscoveryConfig& c) {
  AssemblyOptions o;
  o.kind = DesignKind::drift;
  o.mode = c.mode;
  o.snapshots = c.drift_snapshots;
  o.stride = c.drift_stride;
  return o;
}

AssemblyOptions diff_options(const DiscoveryConfig& c, std::size_t channel) {
  AssemblyOptions o;
  o.kind = DesignKind::diffusion;
  o.mode = c.mode;
  o.snapshots = c.diff_snapshots;
  o.stride = c.diff_stride;
  o.channel = channel;
  return o;
}

SolveSummary summarize(const QpSolution& s) {
  return {s.status, s.objective, s.kkt_residual, s.iterations, s.regularized};
}

Eigen::VectorXd solve_checked(const NormalEquations& ne, const ConstraintSet& cs, const QpOptions& qp,
                              SolveSummary& summary, const char* what) {
  const auto sol = solve_cls(ne, cs, qp);
  summary = summarize(sol);
  if (sol.status == QpStatus::infeasible)
    throw NumericError(std::string(what) + " constraints are infeasible (row " +
                       std::to_string(sol.certificate_row.value_or(0)) + ")");
  return sol.theta;
}

ConstraintSet drift_constraints(const DiscoveryConfig& c) {
  return build_constraints_for_drift(c.drift_basis_size, c.drift_anchor, c.drift_monotonicity);
}

ConstraintSet diff_constraints(const DiscoveryConfig& c) {
  return build_constraints_for_diffusion(c.diff_basis_size, c.diff_anchors, c.diff_monotonicity);
}

KernelEstimate make_estimate(const DiscoveryConfig& c, Eigen::VectorXd rho, std::vector<Eigen::VectorXd> zeta) {
  return KernelEstimate{drift_basis(c), std::move(rho), diff_basis(c), std::move(zeta), c.mode};
}

void attach_validation(MethodResult& m, const TrajectoryDataset& data, const DiscoveryConfig& config,
                       const GroundTruth* truth) {
  if (truth) m.validation = validate_estimate(data, m.estimate, config, *truth);
}

nlohmann::json box_json(const DensityBox& b) { return {{"lo", b.lo}, {"hi", b.hi}, {"bins", b.bins}}; }

DensityBox box_from_json(const nlohmann::json& j, const char* key) {
  static const std::set<std::string> allowed = {"lo", "hi", "bins"};
  if (!j.is_object()) throw ConfigError(std::string(key) + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + key);
  DensityBox b;
  b.lo = j.value("lo", b.lo);
  b.hi = j.value("hi", b.hi);
  b.bins = j.value("bins", b.bins);
  return b;
}

nlohmann::json solve_json(const SolveSummary& s) {
  return {{"status", std::string(to_string(s.status))},
          {"objective", s.objective},
          {"kkt_residual", s.kkt_residual},
          {"iterations", s.iterations},
          {"regularized", s.regularized}};
}

nlohmann::json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

} // namespace

std::string_view to_string(WeightRule rule) { return rule == WeightRule::averaging ? "averaging" : "best"; }

void DiscoveryConfig::validate(const TrajectoryDataset& data) const {
  if (drift_basis_size < 2 || diff_basis_size < 2) throw ConfigError("basis sizes must be at least 2");
  if (!(drift_interval.hi > drift_interval.lo) || !(diff_interval.hi > diff_interval.lo))
    throw ConfigError("basis intervals must satisfy lo < hi");
  drift_constraints(*this);
  diff_constraints(*this);
  used_snapshots(data, drift_options(*this));
  used_snapshots(data, diff_options(*this, 0));
  if (regime == Regime::batch) {
    if (ensemble < 1) throw ConfigError("ensemble size K must be at least 1");
    if (batch_size < 1 || batch_size >= data.n_agents) throw ConfigError("batch size must satisfy 1 <= N_p < N");
    if (mode == DiffusionMode::pairwise_radial_displacement &&
        (drift_snapshots != diff_snapshots || drift_stride != diff_stride))
      throw ConfigError("nonlocal diffusion couples drift and diffusion: M_P must equal M_D with a shared stride");
  }
  if (regime == Regime::mean_field && (density.bins < 1 || !(density.hi > density.lo)))
    throw ConfigError("invalid density box");
}

nlohmann::json to_json(const DiscoveryConfig& c) {
  nlohmann::json anchors = nlohmann::json::array();
  for (const auto& [k, v] : c.diff_anchors) anchors.push_back({k, v});
  return {{"regime", std::string(to_string(c.regime))},
          {"diffusion_mode", std::string(to_string(c.mode))},
          {"drift_basis_size", c.drift_basis_size},
          {"diff_basis_size", c.diff_basis_size},
          {"drift_mesh", std::string(to_string(c.drift_mesh))},
          {"diff_mesh", std::string(to_string(c.diff_mesh))},
          {"drift_interval", {c.drift_interval.lo, c.drift_interval.hi}},
          {"diff_interval", {c.diff_interval.lo, c.diff_interval.hi}},
          {"drift_snapshots", c.drift_snapshots},
          {"diff_snapshots", c.diff_snapshots},
          {"drift_stride", c.drift_stride},
          {"diff_stride", c.diff_stride},
          {"drift_anchor", c.drift_anchor ? nlohmann::json(*c.drift_anchor) : nlohmann::json(nullptr)},
          {"drift_monotonicity", c.drift_monotonicity},
          {"diff_anchors", anchors},
          {"diff_monotonicity", c.diff_monotonicity},
          {"ensemble", c.ensemble},
          {"batch_size", c.batch_size},
          {"density", box_json(c.density)},
          {"error_box", box_json(c.error_box)},
          {"seed", c.seed},
          {"qp",
           {{"constraint_tol", c.qp.constraint_tol},
            {"kkt_tol", c.qp.kkt_tol},
            {"max_iterations", c.qp.max_iterations}}}};
}

DiscoveryConfig discovery_config_from_json(const nlohmann::json& doc) {
  static const std::set<std::string> allowed = {
      "regime", "diffusion_mode", "drift_basis_size", "diff_basis_size", "drift_mesh", "diff_mesh",
      "drift_interval", "diff_interval", "drift_snapshots", "diff_snapshots", "drift_stride", "diff_stride",
      "drift_anchor", "drift_monotonicity", "diff_anchors", "diff_monotonicity", "ensemble", "batch_size",
      "density", "error_box", "seed", "qp"};
  if (!doc.is_object()) throw ConfigError("discovery config must be an object");
  for (const auto& [k, v] : doc.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in discovery config");
  try {
    DiscoveryConfig c;
    if (doc.contains("regime")) c.regime = parse_regime(doc["regime"].get<std::string>());
    if (doc.contains("diffusion_mode")) c.mode = parse_diffusion_mode(doc["diffusion_mode"].get<std::string>());
    c.drift_basis_size = doc.value("drift_basis_size", c.drift_basis_size);
    c.diff_basis_size = doc.value("diff_basis_size", c.diff_basis_size);
    if (doc.contains("drift_mesh")) c.drift_mesh = parse_mesh_kind(doc["drift_mesh"].get<std::string>());
    if (doc.contains("diff_mesh")) c.diff_mesh = parse_mesh_kind(doc["diff_mesh"].get<std::string>());
    auto interval = [&](const char* key, Interval& out) {
      if (!doc.contains(key)) return;
      const auto v = doc[key].get<std::vector<double>>();
      if (v.size() != 2) throw ConfigError(std::string(key) + " must be [lo, hi]");
      out = {v[0], v[1]};
    };
    interval("drift_interval", c.drift_interval);
    interval("diff_interval", c.diff_interval);
    c.drift_snapshots = doc.value("drift_snapshots", c.drift_snapshots);
    c.diff_snapshots = doc.value("diff_snapshots", c.diff_snapshots);
    c.drift_stride = doc.value("drift_stride", c.drift_stride);
    c.diff_stride = doc.value("diff_stride", c.diff_stride);
    if (doc.contains("drift_anchor") && !doc["drift_anchor"].is_null()) c.drift_anchor = doc["drift_anchor"].get<double>();
    c.drift_monotonicity = doc.value("drift_monotonicity", c.drift_monotonicity);
    if (doc.contains("diff_anchors")) {
      for (const auto& pair : doc["diff_anchors"]) {
        if (!pair.is_array() || pair.size() != 2) throw ConfigError("diff_anchors entries must be [index, value]");
        // Negative indices count from the end, -1 being the last coefficient.
        const auto idx = pair[0].get<long long>();
        const auto n = static_cast<long long>(c.diff_basis_size);
        const long long resolved = idx < 0 ? n + idx : idx;
        if (resolved < 0 || resolved >= n) throw ConfigError("diffusion anchor index out of range");
        c.diff_anchors.emplace_back(static_cast<std::size_t>(resolved), pair[1].get<double>());
      }
    }
    c.diff_monotonicity = doc.value("diff_monotonicity", c.diff_monotonicity);
    c.ensemble = doc.value("ensemble", c.ensemble);
    c.batch_size = doc.value("batch_size", c.batch_size);
    if (doc.contains("density")) c.density = box_from_json(doc["density"], "density");
    if (doc.contains("error_box")) c.error_box = box_from_json(doc["error_box"], "error_box");
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("qp")) {
      static const std::set<std::string> qkeys = {"constraint_tol", "kkt_tol", "max_iterations"};
      for (const auto& [k, v] : doc["qp"].items())
        if (!qkeys.count(k)) throw ConfigError("unknown key '" + k + "' in qp");
      c.qp.constraint_tol = doc["qp"].value("constraint_tol", c.qp.constraint_tol);
      c.qp.kkt_tol = doc["qp"].value("kkt_tol", c.qp.kkt_tol);
      c.qp.max_iterations = doc["qp"].value("max_iterations", c.qp.max_iterations);
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("discovery config: ") + e.what());
  }
}

std::vector<double> compute_weights(const std::vector<double>& errors, WeightRule rule, bool* degenerate) {
  if (errors.empty()) throw ConfigError("weights need at least one run");
  for (double e : errors)
    if (!(e >= 0.0) || !std::isfinite(e)) throw ConfigError("run errors must be finite and nonnegative");
  const std::size_t k = errors.size();
  if (degenerate) *degenerate = false;
  std::vector<double> w(k, 0.0);
  if (rule == WeightRule::best) {
    w[static_cast<std::size_t>(std::min_element(errors.begin(), errors.end()) - errors.begin())] = 1.0;
    return w;
  }
  if (k == 1) {
    w[0] = 1.0;
    return w;
  }
  double total = 0.0;
  for (double e : errors) total += e;
  if (total == 0.0) {
    if (degenerate) *degenerate = true;
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(k));
    return w;
  }
  for (std::size_t i = 0; i < k; ++i) w[i] = (1.0 - errors[i] / total) / static_cast<double>(k - 1);
  return w;
}

const MethodResult& DiscoveryReport::method(std::string_view name) const {
  for (const auto& m : methods)
    if (m.name == name) return m;
  throw ConfigError("report has no method '" + std::string(name) + "'");
}

nlohmann::json to_json(const DiscoveryReport& report, bool include_timings) {
  nlohmann::json doc;
  doc["regime"] = std::string(to_string(report.regime));
  doc["config"] = to_json(report.config);
  nlohmann::json methods = nlohmann::json::object();
  for (const auto& m : report.methods) {
    nlohmann::json entry;
    entry["kernels"] = to_json(m.estimate);
    entry["drift_solve"] = solve_json(m.drift_solve);
    entry["diffusion_solves"] = nlohmann::json::array();
    for (const auto& s : m.diffusion_solves) entry["diffusion_solves"].push_back(solve_json(s));
    if (m.validation) {
      const auto& v = *m.validation;
      nlohmann::json val{{"E_P_1", v.drift.l1}, {"E_P_inf", v.drift.linf}};
      val["E_D_1"] = nlohmann::json::array();
      val["E_D_inf"] = nlohmann::json::array();
      for (const auto& d : v.diffusion) {
        val["E_D_1"].push_back(d.l1);
        val["E_D_inf"].push_back(d.linf);
      }
      if (v.trajectory.dim == 1) {
        val["E_f_ave"] = v.trajectory.aggregate;
        val["E_f_fin"] = v.trajectory.final;
      } else {
        val["E_f_1"] = v.trajectory.aggregate;
        val["E_f_T"] = v.trajectory.final;
      }
      entry["validation"] = val;
    }
    methods[m.name] = entry;
  }
  doc["methods"] = methods;
  if (!report.runs.empty()) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : report.runs) {
      nlohmann::json z = nlohmann::json::array();
      for (const auto& c : r.zeta) z.push_back(vector_json(c));
      runs.push_back({{"k", r.index},
                      {"E_k", r.error},
                      {"w_averaging", r.weight_averaging},
                      {"w_best", r.weight_best},
                      {"rho", vector_json(r.rho)},
                      {"zeta", z}});
    }
    doc["runs"] = runs;
    doc["uniform_weight_fallback"] = report.uniform_weight_fallback;
  }
  if (include_timings) doc["timings_s"] = report.timings;
  return doc;
}

Validation validate_estimate(const TrajectoryDataset& data, const KernelEstimate& estimate,
                             const DiscoveryConfig& config, const GroundTruth& truth) {
  Validation v;
  v.drift = kernel_errors(truth.kernels.drift, [&](double r) { return estimate.drift(r); }, config.drift_interval.lo,
                          config.drift_interval.hi);
  for (std::size_t c = 0; c < estimate.zeta.size(); ++c) {
    ScalarFn reference = config.mode == DiffusionMode::local_state
                             ? ScalarFn([&, c](double x) { return truth.kernels.local_amplitude(static_cast<int>(c), x); })
                             : truth.kernels.diffusion;
    v.diffusion.push_back(kernel_errors(reference, [&, c](double r) { return estimate.diffusion(r, c); },
                                        config.diff_interval.lo, config.diff_interval.hi));
  }
  const Scheme scheme = data.n_agents % 2 == 0 ? Scheme::binary : Scheme::batch;
  const auto recon = simulate_reconstructed(data, estimate, scheme, std::min(config.batch_size, data.n_agents - 1),
                                            truth.validation_seed);
  v.trajectory = trajectory_errors(data, recon, config.error_box);
  return v;
}

DiscoveryReport discover_known_S(const TrajectoryDataset& data, const DiscoveryConfig& config,
                                 const GroundTruth* truth) {
  if (!data.has_pairings()) throw ConfigError("regime requires recorded S^n");
  config.validate(data);
  const auto start = Clock::now();
  DiscoveryReport report;
  report.regime = Regime::known_S;
  report.config = config;
  MethodResult m;
  m.name = "known_S";
  const auto pb = drift_basis(config);
  const auto db = diff_basis(config);
  const Eigen::VectorXd rho = solve_checked(normal_known_S(data, pb, drift_options(config)), drift_constraints(config),
                                            config.qp, m.drift_solve, "drift");
  std::vector<Eigen::VectorXd> zeta;
  for (std::size_t c = 0; c < channel_count(config, data); ++c) {
    m.diffusion_solves.emplace_back();
    zeta.push_back(solve_checked(normal_known_S(data, db, diff_options(config, c)), diff_constraints(config), config.qp,
                                 m.diffusion_solves.back(), "diffusion"));
  }
  m.estimate = make_estimate(config, rho, std::move(zeta));
  report.timings["learn"] = seconds_since(start);
  const auto vstart = Clock::now();
  attach_validation(m, data, config, truth);
  report.timings["validate"] = seconds_since(vstart);
  report.methods.push_back(std::move(m));
  return report;
}

DiscoveryReport discover_mean_field(const TrajectoryDataset& data, const DiscoveryConfig& config,
                                    const GroundTruth* truth) {
  config.validate(data);
  const auto start = Clock::now();
  DiscoveryReport report;
  report.regime = Regime::mean_field;
  report.config = config;
  MethodResult m;
  m.name = "mean_field";
  const auto pb = drift_basis(config);
  const auto db = diff_basis(config);
  const Eigen::VectorXd rho =
      solve_checked(normal_mean_field(data, pb, drift_options(config), config.density), drift_constraints(config),
                    config.qp, m.drift_solve, "drift");
  std::vector<Eigen::VectorXd> zeta;
  for (std::size_t c = 0; c < channel_count(config, data); ++c) {
    m.diffusion_solves.emplace_back();
    zeta.push_back(solve_checked(normal_mean_field(data, db, diff_options(config, c), config.density),
                                 diff_constraints(config), config.qp, m.diffusion_solves.back(), "diffusion"));
  }
  m.estimate = make_estimate(config, rho, std::move(zeta));
  report.timings["learn"] = seconds_since(start);
  const auto vstart = Clock::now();
  attach_validation(m, data, config, truth);
  report.timings["validate"] = seconds_since(vstart);
  report.methods.push_back(std::move(m));
  return report;
}

DiscoveryReport discover_rbm(const TrajectoryDataset& data, const DiscoveryConfig& config, const GroundTruth* truth) {
  config.validate(data);
  const auto start = Clock::now();
  DiscoveryReport report;
  report.regime = Regime::batch;
  report.config = config;
  const auto pb = drift_basis(config);
  const auto db = diff_basis(config);
  const auto pc = drift_constraints(config);
  const auto dc = diff_constraints(config);
  const std::size_t channels = channel_count(config, data);
  const std::size_t k_runs = config.ensemble;
  const RandomStream ensemble = RandomStream(config.seed).substream(stream_tag::ensemble);

  std::vector<NormalEquations> drift_ne(k_runs);
  std::vector<std::vector<NormalEquations>> diff_ne(k_runs);
  std::vector<double> errors(k_runs);
  double reconstruct_time = 0.0;
  for (std::size_t k = 0; k < k_runs; ++k) {
    const RandomStream run = ensemble.substream(k);
    // Drift and diffusion designs share the batch draws of this run.
    const RandomStream batch = run.substream(stream_tag::batch);
    EnsembleRun record;
    record.index = k;
    SolveSummary scratch;
    drift_ne[k] = normal_batch(data, pb, drift_options(config), config.batch_size, batch);
    record.rho = solve_checked(drift_ne[k], pc, config.qp, scratch, "drift");
    for (std::size_t c = 0; c < channels; ++c) {
      diff_ne[k].push_back(normal_batch(data, db, diff_options(config, c), config.batch_size, batch));
      record.zeta.push_back(solve_checked(diff_ne[k].back(), dc, config.qp, scratch, "diffusion"));
    }
    const auto rstart = Clock::now();
    const auto estimate = make_estimate(config, record.rho, record.zeta);
    const auto recon = simulate_reconstructed(data, estimate, Scheme::batch, config.batch_size,
                                              run.substream(stream_tag::reconstruct).key());
    record.error = trajectory_errors(data, recon, config.error_box).aggregate;
    reconstruct_time += seconds_since(rstart);
    errors[k] = record.error;
    report.runs.push_back(std::move(record));
  }
  report.timings["ensemble_reconstruct"] = reconstruct_time;

  const auto w_av = compute_weights(errors, WeightRule::averaging, &report.uniform_weight_fallback);
  const auto w_best = compute_weights(errors, WeightRule::best);
  for (std::size_t k = 0; k < k_runs; ++k) {
    report.runs[k].weight_averaging = w_av[k];
    report.runs[k].weight_best = w_best[k];
  }

  for (const auto rule : {WeightRule::averaging, WeightRule::best}) {
    const auto& w = rule == WeightRule::averaging ? w_av : w_best;
    MethodResult m;
    m.name = std::string("rbm_") + std::string(to_string(rule));
    NormalEquations pd = NormalEquations::zeros(pb.size());
    for (std::size_t k = 0; k < k_runs; ++k)
      pd.accumulate(drift_ne[k], w[k] / static_cast<double>(config.drift_snapshots));
    const Eigen::VectorXd rho = solve_checked(pd, pc, config.qp, m.drift_solve, "drift");
    std::vector<Eigen::VectorXd> zeta;
    for (std::size_t c = 0; c < channels; ++c) {
      NormalEquations dd = NormalEquations::zeros(db.size());
      for (std::size_t k = 0; k < k_runs; ++k)
        dd.accumulate(diff_ne[k][c], w[k] / static_cast<double>(config.diff_snapshots));
      m.diffusion_solves.emplace_back();
      zeta.push_back(solve_checked(dd, dc, config.qp, m.diffusion_solves.back(), "diffusion"));
    }
    m.estimate = make_estimate(config, rho, std::move(zeta));
    report.methods.push_back(std::move(m));
  }
  report.timings["learn"] = seconds_since(start);
  const auto vstart = Clock::now();
  for (auto& m : report.methods) attach_validation(m, data, config, truth);
  report.timings["validate"] = seconds_since(vstart);
  return report;
}

DiscoveryReport discover(const TrajectoryDataset& data, const DiscoveryConfig& config, const GroundTruth* truth) {
  switch (config.regime) {
    case Regime::known_S: return discover_known_S(data, config, truth);
    case Regime::batch: return discover_rbm(data, config, truth);
    case Regime::mean_field: return discover_mean_field(data, config, truth);
  }
  throw ConfigError("unknown regime");
}

} // namespace kdisc
