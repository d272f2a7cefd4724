#include "doctest.h"
#include "fixtures.hpp"

#include "kdisc/dynamics.hpp"
#include "kdisc/errors.hpp"
#include "kdisc/parallel.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <random>

using namespace kdisc;

namespace {

ParticleState state_of(std::vector<double> x, int dim = 1) {
  return {0.0, x.size() / static_cast<std::size_t>(dim), dim, std::move(x)};
}

KernelSpec constant_kernels(double p, double d) {
  return {kernels::constant(p), DiffusionMode::pairwise_radial, kernels::constant(d), {}};
}

// Per-agent loop of the binary update, drawing Gaussians the documented way.
std::vector<double> binary_oracle(const ParticleState& s, const PairingPlan& plan, const KernelSpec& k,
                                  double dt, const RandomStream& noise) {
  const int d = s.dim;
  std::vector<double> out = s.x;
  for (std::size_t i = 0; i < s.n_agents; ++i) {
    const std::size_t j = plan.perm[i];
    double r2 = 0.0;
    for (int c = 0; c < d; ++c) r2 += std::pow(s.x[j * d + c] - s.x[i * d + c], 2);
    const double r = std::sqrt(r2);
    auto rng = noise.substream(i).engine();
    std::normal_distribution<double> gauss;
    for (int c = 0; c < d; ++c) {
      const double disp = s.x[j * d + c] - s.x[i * d + c];
      double amp = k.diffusion(r);
      if (k.mode == DiffusionMode::pairwise_radial_displacement) amp *= disp;
      if (k.mode == DiffusionMode::local_state) amp = k.local_amplitude(c, s.x[i * d + c]);
      out[i * d + c] = s.x[i * d + c] + dt * k.drift(r) * disp + std::sqrt(dt) * amp * gauss(rng);
    }
  }
  return out;
}

} // namespace

TEST_SUITE("dynamics") {

TEST_CASE("pairing of two agents is forced") {
  SplitMix64 rng(1);
  const auto plan = sample_pairing(2, rng);
  CHECK(plan.perm == std::vector<std::uint32_t>{1, 0});
}

TEST_CASE("pairing rejects odd N") {
  SplitMix64 rng(1);
  CHECK_THROWS_WITH_AS(sample_pairing(5, rng), "pairing requires even N", ConfigError);
}

TEST_CASE("pairings of six agents are fixed-point-free involutions") {
  SplitMix64 rng(2);
  for (int t = 0; t < 10000; ++t) {
    const auto plan = sample_pairing(6, rng);
    REQUIRE(plan.is_involution());
    REQUIRE(plan.is_fixed_point_free());
  }
}

TEST_CASE("the three matchings of four agents are equally likely") {
  SplitMix64 rng(11);
  std::map<std::uint32_t, int> freq;  // keyed by partner of agent 0
  const int draws = 100000;
  for (int t = 0; t < draws; ++t) ++freq[sample_pairing(4, rng).perm[0]];
  REQUIRE(freq.size() == 3);
  const double p = 1.0 / 3.0;
  const double sigma = std::sqrt(p * (1 - p) / draws);
  for (const auto& [partner, count] : freq) CHECK(std::abs(count / double(draws) - p) < 3 * sigma);
}

TEST_CASE("zero kernels leave the state unchanged") {
  const auto s = state_of({0.3, -0.2, 0.9, 0.1});
  SplitMix64 rng(4);
  const auto plan = sample_pairing(4, rng);
  const auto next = step_binary(s, plan, constant_kernels(0.0, 0.0), 0.1, RandomStream(9));
  CHECK(next.x == s.x);
}

TEST_CASE("two-agent hand computation") {
  const auto s = state_of({0.0, 1.0});
  const auto next = step_binary(s, PairingPlan{{1, 0}}, constant_kernels(1.0, 0.0), 0.1, RandomStream(0));
  CHECK(next.x[0] == doctest::Approx(0.1));
  CHECK(next.x[1] == doctest::Approx(0.9));
  CHECK(next.t == doctest::Approx(0.1));
}

TEST_CASE("binary step equals the scalar oracle in every diffusion mode") {
  for (int dim : {1, 2}) {
    for (auto mode : {DiffusionMode::pairwise_radial, DiffusionMode::pairwise_radial_displacement,
                      DiffusionMode::local_state}) {
      auto data = fixture::random_dataset(4 * dim + 2, dim, 1, 17 + dim);
      KernelSpec k = fixture::smooth_kernels(mode);
      k.local = {kernels::opinion_local()};
      const auto s = data.state(0);
      const RandomStream noise(123);
      const auto next = step_binary(s, data.pairings[0], k, 0.05, noise);
      const auto ref = binary_oracle(s, data.pairings[0], k, 0.05, noise);
      for (std::size_t i = 0; i < ref.size(); ++i) CHECK(next.x[i] == doctest::Approx(ref[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("binary step conserves the mean for symmetric drift without noise") {
  auto data = fixture::random_dataset(10, 2, 1, 5);
  const KernelSpec k{kernels::cucker_smale(), DiffusionMode::pairwise_radial, kernels::constant(0.0), {}};
  const auto next = step_binary(data.state(0), data.pairings[0], k, 0.3, RandomStream(1));
  for (int c = 0; c < 2; ++c) {
    double before = 0.0, after = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
      before += data.frames[0][i * 2 + c];
      after += next.x[i * 2 + c];
    }
    CHECK(after == doctest::Approx(before).epsilon(1e-14));
  }
}

TEST_CASE("non-finite kernel values name the agent") {
  const auto s = state_of({0.0, 1.0});
  const KernelSpec k{[](double) { return std::nan(""); }, DiffusionMode::pairwise_radial, kernels::constant(0.0), {}};
  CHECK_THROWS_AS(step_binary(s, PairingPlan{{1, 0}}, k, 0.1, RandomStream(0)), NumericError);
  try {
    (void)step_binary(s, PairingPlan{{1, 0}}, k, 0.1, RandomStream(0));
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("agent 0") != std::string::npos);
  }
}

TEST_CASE("batch sampling draws distinct partners other than the agent") {
  SplitMix64 rng(8);
  for (std::size_t np : {1U, 5U, 9U, 40U}) {
    const auto picks = sample_batch(np == 40 ? 60 : 10, np, 3, rng);
    CHECK(picks.size() == np);
    std::vector<std::uint32_t> sorted = picks;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
    CHECK(std::find(picks.begin(), picks.end(), 3U) == picks.end());
  }
}

TEST_CASE("exhaustive batch equals the full-interaction average") {
  auto data = fixture::random_dataset(7, 2, 1, 21);
  const KernelSpec k{kernels::cucker_smale(), DiffusionMode::pairwise_radial, kernels::constant(0.0), {}};
  const auto batch = step_batch(data.state(0), k, 6, 0.1, RandomStream(3));
  const auto full = step_full(data.state(0), k, 0.1, RandomStream(4));
  for (std::size_t i = 0; i < batch.x.size(); ++i) CHECK(batch.x[i] == doctest::Approx(full.x[i]).epsilon(1e-14));
}

TEST_CASE("single-partner batch averages to the mean over both partners") {
  const auto s = state_of({0.0, 0.4, 1.0});
  const KernelSpec k{kernels::cucker_smale(), DiffusionMode::pairwise_radial, kernels::constant(0.0), {}};
  const double dt = 0.1;
  auto drift = [&](std::size_t i, std::size_t j) { return dt * k.drift(std::abs(s.x[j] - s.x[i])) * (s.x[j] - s.x[i]); };
  const std::vector<double> analytic{(drift(0, 1) + drift(0, 2)) / 2, (drift(1, 0) + drift(1, 2)) / 2,
                                     (drift(2, 0) + drift(2, 1)) / 2};
  const int draws = 20000;
  std::vector<double> mean(3, 0.0), sq(3, 0.0);
  for (int t = 0; t < draws; ++t) {
    const auto next = step_batch(s, k, 1, dt, RandomStream(1000 + t));
    for (std::size_t i = 0; i < 3; ++i) {
      const double inc = next.x[i] - s.x[i];
      mean[i] += inc / draws;
      sq[i] += inc * inc / draws;
    }
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const double se = std::sqrt((sq[i] - mean[i] * mean[i]) / draws);
    CHECK(std::abs(mean[i] - analytic[i]) <= 3 * se + 1e-15);
  }
}

TEST_CASE("batch step rejects N_p >= N") {
  const auto s = state_of({0.0, 1.0, 2.0});
  CHECK_THROWS_AS(step_batch(s, constant_kernels(1.0, 0.0), 3, 0.1, RandomStream(0)), ConfigError);
}

TEST_CASE("full scheme conserves the mean under linear attraction") {
  SimConfig cfg;
  cfg.n_agents = 30;
  cfg.snapshots = 20;
  cfg.dt = 0.05;
  cfg.seed = 2;
  const auto data = simulate(cfg, constant_kernels(1.0, 0.0), Scheme::full);
  auto mean = [&](std::size_t n) { return std::accumulate(data.frames[n].begin(), data.frames[n].end(), 0.0) / 30.0; };
  for (std::size_t n = 1; n < 20; ++n) CHECK(std::abs(mean(n) - mean(0)) < 1e-12);
}

TEST_CASE("simulation bookkeeping") {
  SimConfig cfg;
  cfg.n_agents = 8;
  cfg.snapshots = 1;
  cfg.seed = 3;
  const auto one = simulate(cfg, fixture::smooth_kernels(), Scheme::binary);
  CHECK(one.snapshots() == 1);
  cfg.snapshots = 6;
  const auto six = simulate(cfg, fixture::smooth_kernels(), Scheme::binary);
  CHECK(six.snapshots() == 6);
  CHECK(six.pairings.size() == 6);
  CHECK(six.frames[0] == one.frames[0]);
  cfg.n_agents = 7;
  CHECK_THROWS_AS(simulate(cfg, fixture::smooth_kernels(), Scheme::binary), ConfigError);
}

TEST_CASE("simulation is deterministic and independent of the thread count") {
  SimConfig cfg;
  cfg.n_agents = 600;
  cfg.snapshots = 5;
  cfg.seed = 77;
  cfg.batch_size = 4;
  for (auto scheme : {Scheme::binary, Scheme::batch}) {
    set_max_threads(1);
    const auto a = simulate(cfg, fixture::smooth_kernels(), scheme);
    set_max_threads(4);
    const auto b = simulate(cfg, fixture::smooth_kernels(), scheme);
    set_max_threads(0);
    CHECK(a.frames == b.frames);
  }
}

TEST_CASE("reconstruction with zero coefficients freezes the state") {
  auto data = fixture::random_dataset(6, 1, 4, 3);
  KernelEstimate e;
  e.drift_basis = BasisFamily::make(0.0, 2.0, 4, MeshKind::uniform);
  e.rho = Eigen::VectorXd::Zero(4);
  e.diff_basis = e.drift_basis;
  e.zeta = {Eigen::VectorXd::Zero(4)};
  for (auto scheme : {Scheme::binary, Scheme::batch}) {
    const auto rec = simulate_reconstructed(data, e, scheme, 2, 5);
    for (const auto& f : rec.frames) CHECK(f == data.frames[0]);
  }
}

TEST_CASE("reconstruction with an interpolant of the truth tracks the true run") {
  SimConfig cfg;
  cfg.n_agents = 50;
  cfg.snapshots = 21;
  cfg.seed = 12;
  const auto truth = fixture::smooth_kernels();
  const auto data = simulate(cfg, truth, Scheme::binary);
  KernelEstimate e;
  e.drift_basis = BasisFamily::make(0.0, 2.0, 200, MeshKind::uniform);
  e.diff_basis = e.drift_basis;
  e.rho.resize(200);
  Eigen::VectorXd z(200);
  for (Eigen::Index k = 0; k < 200; ++k) {
    const double r = e.drift_basis.nodes()[static_cast<std::size_t>(k)];
    e.rho[k] = truth.drift(r);
    z[k] = truth.diffusion(r) * truth.diffusion(r) / 2.0;
  }
  e.zeta = {z};
  const auto rec = simulate_reconstructed(data, e, Scheme::binary, 1, cfg.seed);
  for (std::size_t n = 0; n < data.snapshots(); ++n)
    for (std::size_t i = 0; i < data.frames[n].size(); ++i)
      CHECK(rec.frames[n][i] == doctest::Approx(data.frames[n][i]).epsilon(1e-4));
}

}
