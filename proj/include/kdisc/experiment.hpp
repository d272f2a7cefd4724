#pragma once

#include "kdisc/discover.hpp"
#include "kdisc/dynamics.hpp"
#include "kdisc/kernels.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace kdisc {

// A named kernel, e.g. {"name": "bounded_confidence", "tau": 0.5} or
// {"name": "piecewise", "nodes": [...], "values": [...]}.
ScalarFn kernel_from_json(const nlohmann::json& selector);
std::vector<std::string> kernel_names();

struct ExperimentConfig {
  std::string name = "experiment";
  SimConfig sim{};
  Scheme scheme = Scheme::binary;
  DiffusionMode mode = DiffusionMode::pairwise_radial;
  nlohmann::json drift;                 // selector
  nlohmann::json diffusion;             // selector, pairwise modes
  std::vector<nlohmann::json> local;    // selectors, local_state mode
  DiscoveryConfig discovery{};
  std::uint64_t validation_seed = 0;

  [[nodiscard]] KernelSpec kernels() const;
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
// Schema-checked: unknown keys anywhere are rejected with ConfigError.
ExperimentConfig experiment_from_json(const nlohmann::json& doc);
ExperimentConfig load_experiment(const std::string& path);

enum class Scale { desk, paper };
Scale parse_scale(std::string_view name);
std::string_view to_string(Scale scale);

// Learning windows (M_P, l) of Settings 1-3.
struct Setting {
  int id;
  std::size_t snapshots;
  std::size_t stride;
};
std::vector<Setting> paper_settings();

// Test ids: "known_S", "1" .. "5".
std::vector<std::string> preset_ids();
// Data generation plus discovery defaults of a test. For tests 1-5 the
// discovery block is set for `setting` and `regime`.
ExperimentConfig preset(std::string_view test_id, Scale scale, int setting = 3,
                        Regime regime = Regime::batch);
// Settings each test is run with by the reproduce command.
std::vector<int> preset_settings(std::string_view test_id);
// Regimes each test is run with by the reproduce command.
std::vector<Regime> preset_regimes(std::string_view test_id);

} // namespace kdisc
