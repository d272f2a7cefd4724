#pragma once

#include "kdisc/basis.hpp"
#include "kdisc/design.hpp"
#include "kdisc/dynamics.hpp"
#include "kdisc/metrics.hpp"
#include "kdisc/qp.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace kdisc {

enum class WeightRule { averaging, best };

std::string_view to_string(WeightRule rule);

struct Interval {
  double lo = 0.0;
  double hi = 2.0;
};

struct DiscoveryConfig {
  Regime regime = Regime::known_S;
  DiffusionMode mode = DiffusionMode::pairwise_radial;

  std::size_t drift_basis_size = 10;
  std::size_t diff_basis_size = 8;
  MeshKind drift_mesh = MeshKind::uniform;
  MeshKind diff_mesh = MeshKind::uniform;
  Interval drift_interval{0.0, 2.0};
  Interval diff_interval{0.0, 2.0};

  std::size_t drift_snapshots = 20;  // M_P
  std::size_t diff_snapshots = 10;   // M_D
  std::size_t drift_stride = 1;
  std::size_t diff_stride = 1;

  std::optional<double> drift_anchor;  // rho_0
  int drift_monotonicity = 0;
  std::vector<std::pair<std::size_t, double>> diff_anchors;
  int diff_monotonicity = 0;

  std::size_t ensemble = 5;     // K
  std::size_t batch_size = 20;  // N_p
  DensityBox density{-1.0, 1.0, 100};
  DensityBox error_box{-1.0, 1.0, 50};  // 2D trajectory errors
  std::uint64_t seed = 1;
  QpOptions qp{};

  // Consistency with a dataset: snapshot windows fit, coupled settings in the
  // displacement mode, ensemble and batch sizes.
  void validate(const TrajectoryDataset& data) const;
};

nlohmann::json to_json(const DiscoveryConfig& config);
// Rejects unknown keys; missing keys keep their defaults.
DiscoveryConfig discovery_config_from_json(const nlohmann::json& doc);

// Averaging: E_bar = E / sum E, w = (1 - E_bar) / (K - 1); K = 1 gives w = 1.
// If every E_k is zero the rule is undefined and uniform weights are returned
// with `degenerate` set. Best: unit vector at the smallest index of min E.
std::vector<double> compute_weights(const std::vector<double>& errors, WeightRule rule,
                                    bool* degenerate = nullptr);

struct SolveSummary {
  QpStatus status = QpStatus::optimal;
  double objective = 0.0;
  double kkt_residual = 0.0;
  std::size_t iterations = 0;
  bool regularized = false;
};

struct Validation {
  KernelErrors drift;
  std::vector<KernelErrors> diffusion;  // per channel
  TrajectoryErrors trajectory;
};

struct MethodResult {
  std::string name;  // known_S, rbm_averaging, rbm_best, mean_field
  KernelEstimate estimate;
  SolveSummary drift_solve;
  std::vector<SolveSummary> diffusion_solves;
  std::optional<Validation> validation;
};

struct EnsembleRun {
  std::size_t index = 0;
  Eigen::VectorXd rho;
  std::vector<Eigen::VectorXd> zeta;
  double error = 0.0;  // E_k
  double weight_averaging = 0.0;
  double weight_best = 0.0;
};

struct DiscoveryReport {
  Regime regime = Regime::known_S;
  DiscoveryConfig config;
  std::vector<MethodResult> methods;
  std::vector<EnsembleRun> runs;
  bool uniform_weight_fallback = false;
  std::map<std::string, double> timings;  // seconds, wall clock

  [[nodiscard]] const MethodResult& method(std::string_view name) const;
};

// Report without timings is a pure function of (data, config, truth).
nlohmann::json to_json(const DiscoveryReport& report, bool include_timings = true);

// Ground truth for validation; `validation_seed` drives the fresh randomness of
// the validation trajectories.
struct GroundTruth {
  KernelSpec kernels;
  std::uint64_t validation_seed = 0;
};

DiscoveryReport discover_known_S(const TrajectoryDataset& data, const DiscoveryConfig& config,
                                 const GroundTruth* truth = nullptr);
DiscoveryReport discover_rbm(const TrajectoryDataset& data, const DiscoveryConfig& config,
                             const GroundTruth* truth = nullptr);
DiscoveryReport discover_mean_field(const TrajectoryDataset& data, const DiscoveryConfig& config,
                                    const GroundTruth* truth = nullptr);
DiscoveryReport discover(const TrajectoryDataset& data, const DiscoveryConfig& config,
                         const GroundTruth* truth = nullptr);

// Kernel and trajectory errors of an estimate against the true kernels.
Validation validate_estimate(const TrajectoryDataset& data, const KernelEstimate& estimate,
                             const DiscoveryConfig& config, const GroundTruth& truth);

} // namespace kdisc
