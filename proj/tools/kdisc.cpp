// kdisc: generate trajectories, discover kernels, reproduce the test suite and
// check the mean-square trajectory bound.

#include "kdisc/discover.hpp"
#include "kdisc/errors.hpp"
#include "kdisc/experiment.hpp"
#include "kdisc/metrics.hpp"
#include "kdisc/parallel.hpp"
#include "kdisc/trajectory_io.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace kdisc;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  bool force = false;
  bool emit_plots = false;
  std::string scale = "desk";
};

void guard_output(const fs::path& path, bool force) {
  if (fs::exists(path) && !force)
    throw ConfigError(path.string() + " exists; pass --force to overwrite");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  out << std::setw(2) << doc << '\n';
}

ExperimentConfig resolve_config(const Common& common, const std::string& test_id) {
  ExperimentConfig cfg = !common.config.empty() ? load_experiment(common.config)
                                                : preset(test_id.empty() ? "known_S" : test_id, parse_scale(common.scale));
  return cfg;
}

void emit_plot_data(const fs::path& dir, const DiscoveryReport& report, const ExperimentConfig& cfg,
                    const TrajectoryDataset& data) {
  fs::create_directories(dir);
  const KernelSpec truth = cfg.kernels();
  auto find = [&](const char* name) -> const MethodResult* {
    for (const auto& m : report.methods)
      if (m.name == name) return &m;
    return nullptr;
  };
  const MethodResult* cols[] = {find("rbm_averaging"), find("rbm_best"), find("mean_field"), find("known_S")};
  const auto& d = report.config;
  auto cell = [](std::ostream& out, const MethodResult* m, auto&& eval) {
    out << ',';
    if (m) out << eval(*m);
  };
  {
    std::ofstream out(dir / "kernels.csv");
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    out << "r,P_true,P_hat_av,P_hat_best,P_hat_mf,P_hat_known_S\n";
    const std::size_t points = 401;
    for (std::size_t k = 0; k < points; ++k) {
      const double r = d.drift_interval.lo + (d.drift_interval.hi - d.drift_interval.lo) * k / (points - 1);
      out << r << ',' << truth.drift(r);
      for (const auto* m : cols) cell(out, m, [&](const MethodResult& mr) { return mr.estimate.drift(r); });
      out << '\n';
    }
  }
  {
    std::ofstream out(dir / "diffusion.csv");
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    const std::size_t channels = d.mode == DiffusionMode::local_state ? static_cast<std::size_t>(data.dim) : 1;
    out << "channel,arg,D_true,D_hat_av,D_hat_best,D_hat_mf,D_hat_known_S\n";
    const std::size_t points = 401;
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t k = 0; k < points; ++k) {
        const double a = d.diff_interval.lo + (d.diff_interval.hi - d.diff_interval.lo) * k / (points - 1);
        const double t = d.mode == DiffusionMode::local_state ? truth.local_amplitude(static_cast<int>(c), a)
                                                               : truth.diffusion(a);
        out << c << ',' << a << ',' << t;
        for (const auto* m : cols) cell(out, m, [&](const MethodResult& mr) { return mr.estimate.diffusion(a, c); });
        out << '\n';
      }
  }
  for (const auto& m : report.methods) {
    if (!m.validation) continue;
    std::ofstream out(dir / ("error_series_" + m.name + ".csv"));
    write_error_series_csv(out, data, m.validation->trajectory);
  }
  if (data.dim == 1) {
    // Final-time histogram of the data on the density box.
    const auto grid = estimate_density(data.state(data.snapshots() - 1), d.density);
    std::ofstream out(dir / "density_final.csv");
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    out << "x,f_data\n";
    for (std::size_t m = 0; m < grid.cells(); ++m) out << grid.center(m, 0) << ',' << grid.values[m] << '\n';
  }
}

void print_summary(const DiscoveryReport& report) {
  for (const auto& m : report.methods) {
    std::cout << "  " << std::left << std::setw(14) << m.name << " drift:" << to_string(m.drift_solve.status);
    if (m.validation) {
      const auto& v = *m.validation;
      std::cout << std::scientific << std::setprecision(3) << "  E_P^1=" << v.drift.l1 << " E_P^inf=" << v.drift.linf;
      for (std::size_t c = 0; c < v.diffusion.size(); ++c)
        std::cout << "  E_D" << (v.diffusion.size() > 1 ? std::to_string(c + 1) : "") << "^1=" << v.diffusion[c].l1;
      std::cout << (v.trajectory.dim == 1 ? "  E_f^ave=" : "  E_f^1=") << v.trajectory.aggregate
                << (v.trajectory.dim == 1 ? " E_f^fin=" : " E_f^T=") << v.trajectory.final;
      std::cout << std::defaultfloat;
    }
    std::cout << '\n';
  }
}

int cmd_generate(const Common& common, const std::string& test_id, const std::string& out_path,
                 const std::string& csv_path) {
  ExperimentConfig cfg = resolve_config(common, test_id);
  if (common.seed) cfg.sim.seed = *common.seed;
  const fs::path out = out_path.empty() ? fs::path(cfg.name + ".kdtrj") : fs::path(out_path);
  guard_output(out, common.force);
  const auto data = simulate(cfg.sim, cfg.kernels(), cfg.scheme);
  write_trajectory(out, data);
  if (!csv_path.empty()) {
    guard_output(csv_path, common.force);
    std::ofstream csv(csv_path);
    write_trajectory_csv(csv, data);
  }
  std::cout << "wrote " << out.string() << " (N=" << data.n_agents << ", d=" << data.dim << ", M=" << data.snapshots()
            << ", pairings=" << (data.has_pairings() ? "yes" : "no") << ")\n";
  return 0;
}

int cmd_discover(const Common& common, const std::string& test_id, const std::string& data_path,
                 const std::string& regime, const std::string& out_path, const std::string& plots_dir) {
  ExperimentConfig cfg = resolve_config(common, test_id);
  if (!regime.empty()) cfg.discovery.regime = parse_regime(regime);
  if (common.seed) cfg.discovery.seed = *common.seed;
  const auto data = read_trajectory(data_path);
  const fs::path out = out_path.empty() ? fs::path(cfg.name + "_report.json") : fs::path(out_path);
  guard_output(out, common.force);
  const GroundTruth truth{cfg.kernels(), cfg.validation_seed};
  const auto report = discover(data, cfg.discovery, &truth);
  json doc = to_json(report);
  doc["experiment"] = to_json(cfg);
  doc["data"] = data_path;
  write_json(out, doc);
  std::cout << "regime " << to_string(report.regime) << " -> " << out.string() << '\n';
  print_summary(report);
  if (common.emit_plots) emit_plot_data(plots_dir.empty() ? out.parent_path() / "plots" : fs::path(plots_dir), report, cfg, data);
  return 0;
}

int cmd_reproduce(const Common& common, const std::string& test_id, const std::string& out_dir) {
  const Scale scale = parse_scale(common.scale);
  const fs::path dir = out_dir.empty() ? fs::path("reproduce_" + test_id + "_" + std::string(to_string(scale)))
                                       : fs::path(out_dir);
  if (fs::exists(dir) && !fs::is_empty(dir) && !common.force)
    throw ConfigError(dir.string() + " is not empty; pass --force to overwrite");
  fs::create_directories(dir);

  ExperimentConfig base = preset(test_id, scale);
  if (common.seed) base.sim.seed = *common.seed;
  std::cout << "test " << test_id << " (" << to_string(scale) << "): N=" << base.sim.n_agents << " d=" << base.sim.dim
            << " M=" << base.sim.snapshots << " dt=" << base.sim.dt << '\n';
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = simulate(base.sim, base.kernels(), base.scheme);
  write_trajectory(dir / "data.kdtrj", data);
  std::cout << "  generated in " << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
            << " s\n";

  json summary = json::array();
  auto run = [&](const ExperimentConfig& cfg, const std::string& label) {
    const GroundTruth truth{cfg.kernels(), cfg.validation_seed};
    const auto report = discover(data, cfg.discovery, &truth);
    json doc = to_json(report);
    doc["experiment"] = to_json(cfg);
    write_json(dir / (label + ".json"), doc);
    std::cout << label << '\n';
    print_summary(report);
    if (common.emit_plots) emit_plot_data(dir / ("plots_" + label), report, cfg, data);
    for (const auto& m : report.methods) {
      json row{{"run", label}, {"method", m.name}};
      if (m.validation) row["validation"] = doc["methods"][m.name]["validation"];
      summary.push_back(row);
    }
  };
  const auto settings = preset_settings(test_id);
  if (settings.empty()) {
    run(base, "known_S");
  } else {
    for (int s : settings)
      for (Regime r : preset_regimes(test_id)) {
        ExperimentConfig cfg = preset(test_id, scale, s, r);
        cfg.sim = base.sim;
        run(cfg, "S" + std::to_string(s) + "_" + std::string(to_string(r)));
      }
  }
  write_json(dir / "summary.json", summary);
  return 0;
}

int cmd_bound_check(const Common& common, std::size_t paths) {
  int status = 0;
  for (double eps : {0.0, 0.01, 0.05, 0.1}) {
    TheoremCheckConfig cfg;
    cfg.drift = kernels::cucker_smale();
    cfg.diffusion = kernels::pair_decay();
    cfg.perturbation = eps;
    cfg.paths = paths;
    if (common.seed) cfg.seed = *common.seed;
    const auto r = theorem_check(cfg);
    const bool ok = eps == 0.0 ? r.empirical <= 1e-20 : r.holds();
    std::cout << std::scientific << std::setprecision(3) << "eps=" << eps << "  empirical=" << r.empirical
              << "  bound=" << r.bound << "  " << (ok ? "ok" : "VIOLATED") << '\n';
    if (!ok) status = 3;
  }
  return status;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel discovery for stochastic binary-interaction systems"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Experiment JSON document");
    sub->add_option("--seed", common.seed, "Override the random seed");
    sub->add_option("--threads", common.threads, "Cap on worker threads (0 = all cores)");
    sub->add_flag("--force", common.force, "Overwrite existing outputs");
    sub->add_flag("--emit-plots", common.emit_plots, "Write CSV plot data");
    sub->add_option("--scale", common.scale, "Preset scale: desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  };

  std::string test_id, out, csv, data, regime, plots;
  std::size_t paths = 1000;

  auto* gen = app.add_subcommand("generate", "Simulate a trajectory file");
  add_common(gen);
  gen->add_option("--test", test_id, "Use a preset instead of --config (known_S, 1..5)");
  gen->add_option("-o,--out", out, "Trajectory file to write");
  gen->add_option("--csv", csv, "Also write the lossless CSV export");

  auto* disc = app.add_subcommand("discover", "Learn kernels from a trajectory file");
  add_common(disc);
  disc->add_option("--test", test_id, "Use a preset instead of --config");
  disc->add_option("--data", data, "Trajectory file")->required();
  disc->add_option("--regime", regime, "known_S, rbm or mean_field (overrides the config)");
  disc->add_option("-o,--out", out, "Report JSON to write");
  disc->add_option("--plots-dir", plots, "Directory for --emit-plots CSVs");

  auto* rep = app.add_subcommand("reproduce", "Run a preset test end to end");
  add_common(rep);
  rep->add_option("test", test_id, "known_S, 1, 2, 3, 4 or 5")->required();
  rep->add_option("-o,--out", out, "Output directory");

  auto* bound = app.add_subcommand("bound-check", "Monte Carlo check of the trajectory error bound");
  add_common(bound);
  bound->add_option("--paths", paths, "Monte Carlo paths per perturbation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    set_max_threads(common.threads);
    if (*gen) return cmd_generate(common, test_id, out, csv);
    if (*disc) return cmd_discover(common, test_id, data, regime, out, plots);
    if (*rep) return cmd_reproduce(common, test_id, out);
    if (*bound) return cmd_bound_check(common, paths);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
