#pragma once

#include "kdisc/basis.hpp"
#include "kdisc/kernels.hpp"
#include "kdisc/random.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace kdisc {

// Agent configuration at one time, laid out in d-blocks: x[i*d + c].
struct ParticleState {
  double t = 0.0;
  std::size_t n_agents = 0;
  int dim = 1;
  std::vector<double> x;

  [[nodiscard]] std::span<const double> agent(std::size_t i) const {
    return {x.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  void validate() const;
};

// One interaction partner per agent, 0-based.
struct PairingPlan {
  std::vector<std::uint32_t> perm;

  [[nodiscard]] bool is_fixed_point_free() const noexcept;
  [[nodiscard]] bool is_involution() const noexcept;
  [[nodiscard]] bool is_permutation() const noexcept;
};

enum class Scheme { binary, batch, full };

std::string_view to_string(Scheme scheme);
Scheme parse_scheme(std::string_view name);

// Noise law of the batch scheme.
//   per_partner:     (sqrt(dt)/N_p) * sum_j D_ij xi_ij, one Gaussian per sampled partner
//   pooled_variance: sqrt(dt * mean_j D_ij^2) * xi_i, the variance-matched form
//                    used when driving learned kernels
enum class BatchNoise { per_partner, pooled_variance };

struct UniformLaw {
  double lo = -1.0;
  double hi = 1.0;
};

struct SimConfig {
  std::size_t n_agents = 0;
  int dim = 1;
  double dt = 0.01;
  std::size_t snapshots = 1;  // M, including the initial condition
  std::size_t batch_size = 1; // N_p for the batch scheme
  std::uint64_t seed = 0;
  UniformLaw initial_law{};
  std::vector<double> initial_samples; // overrides initial_law when non-empty
  std::optional<double> domain_half_width;
  BatchNoise batch_noise = BatchNoise::per_partner;

  void validate(Scheme scheme) const;
};

struct TrajectoryDataset {
  std::size_t n_agents = 0;
  int dim = 1;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> frames;  // M frames of d*N values
  std::vector<PairingPlan> pairings;        // S^n active at t_n; empty if unobserved

  [[nodiscard]] std::size_t snapshots() const noexcept { return frames.size(); }
  [[nodiscard]] bool has_pairings() const noexcept { return !pairings.empty(); }
  [[nodiscard]] double time(std::size_t n) const noexcept { return static_cast<double>(n) * dt; }
  [[nodiscard]] ParticleState state(std::size_t n) const;
};

// Uniform random perfect matching, returned as a fixed-point-free involution.
PairingPlan sample_pairing(std::size_t n_agents, SplitMix64& rng);

// Binary interaction step. Agent i draws its Gaussian from noise.substream(i).
ParticleState step_binary(const ParticleState& state, const PairingPlan& plan,
                          const KernelSpec& kernels, double dt, const RandomStream& noise);

// Random-batch step: agent i samples N_p distinct partners (excluding itself)
// and its Gaussians from stream.substream(i).
ParticleState step_batch(const ParticleState& state, const KernelSpec& kernels,
                         std::size_t batch_size, double dt, const RandomStream& stream,
                         BatchNoise noise_law = BatchNoise::per_partner);

// Euler-Maruyama step of the fully interacting system, averaging over all
// N-1 partners with independent Gaussians per pair. O(N^2).
ParticleState step_full(const ParticleState& state, const KernelSpec& kernels, double dt,
                        const RandomStream& stream);

// N_p distinct partners of `agent`, uniformly sampled from the other agents.
std::vector<std::uint32_t> sample_batch(std::size_t n_agents, std::size_t batch_size,
                                        std::size_t agent, SplitMix64& rng);

ParticleState initial_state(const SimConfig& config);

TrajectoryDataset simulate(const SimConfig& config, const KernelSpec& kernels, Scheme scheme);

// Same as simulate() but starting from a given state.
TrajectoryDataset simulate_from(const ParticleState& initial, const SimConfig& config,
                                const KernelSpec& kernels, Scheme scheme);

// Trajectory driven by learned kernels from the data's initial condition,
// over the data's full snapshot window. The batch scheme uses the pooled
// variance noise law.
TrajectoryDataset simulate_reconstructed(const TrajectoryDataset& data,
                                         const KernelEstimate& estimate, Scheme scheme,
                                         std::size_t batch_size, std::uint64_t seed);

} // namespace kdisc
