#include "doctest.h"
#include "fixtures.hpp"

#include "kdisc/discover.hpp"
#include "kdisc/errors.hpp"
#include "kdisc/experiment.hpp"
#include "kdisc/trajectory_io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace kdisc;

namespace {

TrajectoryDataset small_run(Scheme scheme = Scheme::binary) {
  SimConfig cfg;
  cfg.n_agents = 2000;
  cfg.snapshots = 41;
  cfg.dt = 0.01;
  cfg.seed = 31;
  return simulate(cfg, fixture::smooth_kernels(DiffusionMode::pairwise_radial_displacement), scheme);
}

DiscoveryConfig small_config(Regime regime) {
  DiscoveryConfig c;
  c.regime = regime;
  c.mode = DiffusionMode::pairwise_radial_displacement;
  c.drift_basis_size = 6;
  c.diff_basis_size = 5;
  c.drift_snapshots = 20;
  c.diff_snapshots = 20;
  c.drift_anchor = 1.0;
  c.drift_monotonicity = -1;
  c.diff_anchors = {{0, 0.25 * 0.25 / 2.0}};
  c.ensemble = 3;
  c.batch_size = 20;
  c.seed = 5;
  return c;
}

} // namespace

TEST_SUITE("discover") {

TEST_CASE("averaging weights") {
  const auto w = compute_weights({1.0, 1.0, 2.0}, WeightRule::averaging);
  CHECK(w[0] == doctest::Approx(0.375));
  CHECK(w[2] == doctest::Approx(0.25));
  CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0));
  const auto equal = compute_weights({0.3, 0.3, 0.3, 0.3}, WeightRule::averaging);
  for (double v : equal) CHECK(v == doctest::Approx(0.25));
  CHECK(compute_weights({0.7}, WeightRule::averaging) == std::vector<double>{1.0});
}

TEST_CASE("degenerate averaging falls back to uniform weights") {
  bool degenerate = false;
  const auto w = compute_weights({0.0, 0.0}, WeightRule::averaging, &degenerate);
  CHECK(degenerate);
  CHECK(w == std::vector<double>{0.5, 0.5});
  CHECK_THROWS_AS(compute_weights({}, WeightRule::averaging), ConfigError);
  CHECK_THROWS_AS(compute_weights({-1.0, 1.0}, WeightRule::averaging), ConfigError);
}

TEST_CASE("best rule picks the first minimum") {
  CHECK(compute_weights({0.3, 0.1, 0.1}, WeightRule::best) == std::vector<double>{0.0, 1.0, 0.0});
}

TEST_CASE("known pairings recover the kernels of a small run") {
  const auto data = small_run();
  GroundTruth truth{fixture::smooth_kernels(DiffusionMode::pairwise_radial_displacement), 3};
  const auto report = discover(data, small_config(Regime::known_S), &truth);
  const auto& m = report.method("known_S");
  REQUIRE(m.validation);
  CHECK(m.estimate.rho[0] == 1.0);
  CHECK(m.validation->drift.l1 < 0.2);
  for (Eigen::Index k = 0; k + 1 < m.estimate.rho.size(); ++k) CHECK(m.estimate.rho[k] >= m.estimate.rho[k + 1] - 1e-10);
  for (Eigen::Index k = 0; k < m.estimate.zeta[0].size(); ++k) CHECK(m.estimate.zeta[0][k] >= -1e-12);
}

TEST_CASE("known pairings regime refuses data without pairings") {
  auto data = small_run();
  data.pairings.clear();
  CHECK_THROWS_WITH_AS(discover(data, small_config(Regime::known_S)), "regime requires recorded S^n", ConfigError);
}

TEST_CASE("ensemble report carries runs, weights and both rules") {
  const auto data = small_run();
  const auto report = discover(data, small_config(Regime::batch));
  REQUIRE(report.runs.size() == 3);
  double av = 0.0, best = 0.0;
  for (const auto& r : report.runs) {
    CHECK(r.error > 0.0);
    av += r.weight_averaging;
    best += r.weight_best;
  }
  CHECK(av == doctest::Approx(1.0));
  CHECK(best == doctest::Approx(1.0));
  CHECK_NOTHROW((void)report.method("rbm_averaging"));
  CHECK_NOTHROW((void)report.method("rbm_best"));
  CHECK_THROWS_AS((void)report.method("mean_field"), ConfigError);
  // The best-rule estimate is the winning run's regression.
  std::size_t winner = 0;
  for (const auto& r : report.runs)
    if (r.weight_best == 1.0) winner = r.index;
  CHECK((report.method("rbm_best").estimate.rho - report.runs[winner].rho).norm() <= 1e-8);
}

TEST_CASE("mean-field discovery runs on unpaired data") {
  auto data = small_run();
  data.pairings.clear();
  GroundTruth truth{fixture::smooth_kernels(DiffusionMode::pairwise_radial_displacement), 3};
  const auto report = discover(data, small_config(Regime::mean_field), &truth);
  CHECK(report.method("mean_field").validation->drift.l1 < 0.3);
}

TEST_CASE("reports are reproducible") {
  const auto data = small_run();
  auto cfg = small_config(Regime::batch);
  cfg.ensemble = 2;
  const auto a = to_json(discover(data, cfg), false).dump();
  const auto b = to_json(discover(data, cfg), false).dump();
  CHECK(a == b);
}

TEST_CASE("configuration consistency checks") {
  const auto data = small_run();
  auto cfg = small_config(Regime::batch);
  cfg.batch_size = data.n_agents;
  CHECK_THROWS_AS(cfg.validate(data), ConfigError);
  cfg = small_config(Regime::batch);
  cfg.diff_stride = 2;
  CHECK_THROWS_AS(cfg.validate(data), ConfigError);
  cfg = small_config(Regime::batch);
  cfg.ensemble = 0;
  CHECK_THROWS_AS(cfg.validate(data), ConfigError);
}

TEST_CASE("discovery config json") {
  const auto cfg = small_config(Regime::mean_field);
  const auto back = discovery_config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
  auto doc = to_json(cfg);
  doc["learning_rate"] = 0.1;
  CHECK_THROWS_WITH_AS(discovery_config_from_json(doc), doctest::Contains("learning_rate"), ConfigError);
  doc = to_json(cfg);
  doc["diff_anchors"] = nlohmann::json::array({nlohmann::json::array({-1, 0.0})});
  CHECK(discovery_config_from_json(doc).diff_anchors.at(0).first == cfg.diff_basis_size - 1);
}

TEST_CASE("experiment json rejects unknown keys at every level") {
  const auto base = to_json(preset("3", Scale::desk));
  CHECK(to_json(experiment_from_json(base)) == base);
  for (const char* ptr : {"/extra", "/simulation/extra", "/kernels/extra", "/discovery/extra", "/kernels/drift/extra"}) {
    auto doc = base;
    doc[nlohmann::json::json_pointer(ptr)] = 1;
    CHECK_THROWS_AS(experiment_from_json(doc), ConfigError);
  }
  auto doc = base;
  doc["kernels"]["drift"] = {{"name", "no_such_kernel"}};
  CHECK_THROWS_AS((void)experiment_from_json(doc).kernels(), ConfigError);
}

TEST_CASE("presets are self-consistent") {
  for (const auto& id : preset_ids())
    for (int s : preset_settings(id).empty() ? std::vector<int>{1} : preset_settings(id))
      for (auto regime : preset_regimes(id)) {
        CAPTURE(id);
        const auto c = preset(id, Scale::desk, s, regime);
        CHECK_NOTHROW(c.validate());
      }
  CHECK_THROWS_AS(preset("9", Scale::desk), ConfigError);
  CHECK(paper_settings().size() == 3);
  CHECK(paper_settings()[0].snapshots == 100);
}

TEST_CASE("trajectory files round trip bit-exactly") {
  for (int dim : {1, 2}) {
    auto data = fixture::random_dataset(6, dim, 4, 9);
    std::stringstream buf;
    write_trajectory(buf, data);
    const auto back = read_trajectory(buf);
    CHECK(back.frames == data.frames);
    CHECK(back.dt == data.dt);
    CHECK(back.seed == data.seed);
    REQUIRE(back.pairings.size() == data.pairings.size());
    for (std::size_t n = 0; n < data.pairings.size(); ++n) CHECK(back.pairings[n].perm == data.pairings[n].perm);
  }
  std::stringstream junk("KDTRJ0 nonsense");
  CHECK_THROWS_AS(read_trajectory(junk), ConfigError);
}

TEST_CASE("trajectory csv export") {
  auto data = fixture::random_dataset(2, 2, 2, 9);
  std::ostringstream out;
  write_trajectory_csv(out, data);
  const std::string text = out.str();
  CHECK(text.rfind("n,t,i,x_1,x_2\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
}

}
