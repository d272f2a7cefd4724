#pragma once

#include "kdisc/dynamics.hpp"
#include "kdisc/random.hpp"

#include <random>

namespace fixture {

// Random frames, plus pairings when n is even; the frames need not follow any
// dynamics.
inline kdisc::TrajectoryDataset random_dataset(std::size_t n, int dim, std::size_t m, std::uint64_t seed,
                                               double spread = 1.0) {
  kdisc::SplitMix64 rng(seed);
  std::uniform_real_distribution<double> u(-spread, spread);
  kdisc::TrajectoryDataset data;
  data.n_agents = n;
  data.dim = dim;
  data.dt = 0.01;
  data.seed = seed;
  for (std::size_t k = 0; k < m; ++k) {
    std::vector<double> frame(n * static_cast<std::size_t>(dim));
    for (auto& v : frame) v = u(rng);
    data.frames.push_back(frame);
    if (n % 2 == 0) data.pairings.push_back(kdisc::sample_pairing(n, rng));
  }
  return data;
}

inline kdisc::KernelSpec smooth_kernels(kdisc::DiffusionMode mode = kdisc::DiffusionMode::pairwise_radial) {
  return {[](double r) { return 1.0 / ((1.0 + r * r) * (1.0 + r * r)); }, mode,
          [](double r) { return 0.25 / ((1.0 + r) * (1.0 + r)); }, {}};
}

} // namespace fixture
