#include "kdisc/dynamics.hpp"

#include "kdisc/errors.hpp"
#include "kdisc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

namespace kdisc {

void ParticleState::validate() const {
  if (dim != 1 && dim != 2) throw ConfigError("state dimension must be 1 or 2");
  if (x.size() != n_agents * static_cast<std::size_t>(dim))
    throw ConfigError("state length must equal d*N");
  for (std::size_t k = 0; k < x.size(); ++k)
    if (!std::isfinite(x[k])) throw NumericError("non-finite state entry at index " + std::to_string(k));
}

bool PairingPlan::is_permutation() const noexcept {
  std::vector<bool> seen(perm.size(), false);
  for (auto j : perm) {
    if (j >= perm.size() || seen[j]) return false;
    seen[j] = true;
  }
  return true;
}

bool PairingPlan::is_fixed_point_free() const noexcept {
  for (std::size_t i = 0; i < perm.size(); ++i)
    if (perm[i] == i) return false;
  return true;
}

bool PairingPlan::is_involution() const noexcept {
  for (std::size_t i = 0; i < perm.size(); ++i)
    if (perm[i] >= perm.size() || perm[perm[i]] != i) return false;
  return true;
}

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::binary: return "binary";
    case Scheme::batch: return "batch";
    case Scheme::full: return "full";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "binary") return Scheme::binary;
  if (name == "batch") return Scheme::batch;
  if (name == "full") return Scheme::full;
  throw ConfigError("unknown scheme '" + std::string(name) + "'");
}

void SimConfig::validate(Scheme scheme) const {
  if (n_agents < 2) throw ConfigError("simulation needs N >= 2");
  if (dim != 1 && dim != 2) throw ConfigError("state dimension must be 1 or 2");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("time step must be positive");
  if (snapshots < 1) throw ConfigError("snapshot count must be >= 1");
  if (scheme == Scheme::binary && n_agents % 2 != 0) throw ConfigError("pairing requires even N");
  if (scheme == Scheme::batch && (batch_size < 1 || batch_size >= n_agents))
    throw ConfigError("batch size must satisfy 1 <= N_p < N");
  if (!initial_samples.empty() && initial_samples.size() != n_agents * static_cast<std::size_t>(dim))
    throw ConfigError("explicit initial samples must have d*N entries");
  if (initial_samples.empty() && !(initial_law.lo < initial_law.hi))
    throw ConfigError("uniform initial law needs lo < hi");
  if (domain_half_width && !(*domain_half_width > 0.0))
    throw ConfigError("domain half-width must be positive");
}

ParticleState TrajectoryDataset::state(std::size_t n) const {
  return ParticleState{time(n), n_agents, dim, frames.at(n)};
}

PairingPlan sample_pairing(std::size_t n_agents, SplitMix64& rng) {
  if (n_agents < 2 || n_agents % 2 != 0) throw ConfigError("pairing requires even N");
  std::vector<std::uint32_t> order(n_agents);
  std::iota(order.begin(), order.end(), 0U);
  std::shuffle(order.begin(), order.end(), rng);
  PairingPlan plan{std::vector<std::uint32_t>(n_agents)};
  for (std::size_t k = 0; k < n_agents; k += 2) {
    plan.perm[order[k]] = order[k + 1];
    plan.perm[order[k + 1]] = order[k];
  }
  return plan;
}

std::vector<std::uint32_t> sample_batch(std::size_t n_agents, std::size_t batch_size,
                                        std::size_t agent, SplitMix64& rng) {
  const std::size_t pool = n_agents - 1;
  if (batch_size > pool) throw ConfigError("batch size exceeds the number of partners");
  std::vector<std::uint32_t> chosen;
  chosen.reserve(batch_size);
  // Floyd's sampling without replacement over {0..pool-1}; `marks` is scratch
  // that is cleared again before returning.
  thread_local std::vector<std::uint8_t> marks;
  if (marks.size() < pool) marks.assign(pool, 0);
  for (std::size_t j = pool - batch_size; j < pool; ++j) {
    std::uniform_int_distribution<std::uint64_t> pick(0, j);
    auto t = static_cast<std::uint32_t>(pick(rng));
    if (marks[t]) t = static_cast<std::uint32_t>(j);
    marks[t] = 1;
    chosen.push_back(t);
  }
  for (auto v : chosen) marks[v] = 0;
  for (auto& v : chosen)
    if (v >= agent) ++v;
  return chosen;
}

namespace {

constexpr int kMaxDim = 2;

struct PairTerms {
  double drift[kMaxDim];
  double amplitude[kMaxDim];
};

[[noreturn]] void throw_non_finite(const char* what, std::size_t agent, double r) {
  std::ostringstream msg;
  msg << "non-finite " << what << " kernel value at agent " << agent << " (r = " << r << ")";
  throw NumericError(msg.str());
}

// Drift P(r)(x_j - x_i) and noise amplitude of agent i interacting with j.
PairTerms pair_terms(const KernelSpec& kernels, const double* xi, const double* xj, int dim,
                     std::size_t agent) {
  PairTerms out{};
  double disp[kMaxDim];
  double r2 = 0.0;
  for (int c = 0; c < dim; ++c) {
    disp[c] = xj[c] - xi[c];
    r2 += disp[c] * disp[c];
  }
  const double r = std::sqrt(r2);
  const double p = kernels.drift(r);
  if (!std::isfinite(p)) throw_non_finite("drift", agent, r);
  for (int c = 0; c < dim; ++c) out.drift[c] = p * disp[c];

  switch (kernels.mode) {
    case DiffusionMode::pairwise_radial: {
      const double d = kernels.diffusion(r);
      if (!std::isfinite(d)) throw_non_finite("diffusion", agent, r);
      for (int c = 0; c < dim; ++c) out.amplitude[c] = d;
      break;
    }
    case DiffusionMode::pairwise_radial_displacement: {
      const double d = kernels.diffusion(r);
      if (!std::isfinite(d)) throw_non_finite("diffusion", agent, r);
      for (int c = 0; c < dim; ++c) out.amplitude[c] = d * disp[c];
      break;
    }
    case DiffusionMode::local_state:
      for (int c = 0; c < dim; ++c) {
        const double d = kernels.local_amplitude(c, xi[c]);
        if (!std::isfinite(d)) throw_non_finite("diffusion", agent, r);
        out.amplitude[c] = d;
      }
      break;
  }
  return out;
}

void check_state(const ParticleState& state) {
  if (state.dim != 1 && state.dim != 2) throw ConfigError("state dimension must be 1 or 2");
  if (state.x.size() != state.n_agents * static_cast<std::size_t>(state.dim))
    throw ConfigError("state length must equal d*N");
}

} // namespace

ParticleState step_binary(const ParticleState& state, const PairingPlan& plan,
                          const KernelSpec& kernels, double dt, const RandomStream& noise) {
  check_state(state);
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  if (plan.perm.size() != state.n_agents || !plan.is_permutation() || !plan.is_fixed_point_free())
    throw ConfigError("pairing plan is not a fixed-point-free permutation of the agents");
  const int d = state.dim;
  const double sqdt = std::sqrt(dt);
  ParticleState next{state.t + dt, state.n_agents, d, state.x};
  parallel_for(state.n_agents, [&](std::size_t i) {
    const std::size_t j = plan.perm[i];
    const double* xi = state.x.data() + i * d;
    const PairTerms terms = pair_terms(kernels, xi, state.x.data() + j * d, d, i);
    auto rng = noise.substream(i).engine();
    std::normal_distribution<double> gauss;
    for (int c = 0; c < d; ++c)
      next.x[i * d + c] = xi[c] + dt * terms.drift[c] + sqdt * terms.amplitude[c] * gauss(rng);
  });
  return next;
}

ParticleState step_batch(const ParticleState& state, const KernelSpec& kernels,
                         std::size_t batch_size, double dt, const RandomStream& stream,
                         BatchNoise noise_law) {
  check_state(state);
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  if (batch_size < 1 || batch_size >= state.n_agents)
    throw ConfigError("batch size must satisfy 1 <= N_p < N");
  const int d = state.dim;
  const double sqdt = std::sqrt(dt);
  const double inv = 1.0 / static_cast<double>(batch_size);
  ParticleState next{state.t + dt, state.n_agents, d, state.x};
  parallel_for(state.n_agents, [&](std::size_t i) {
    auto rng = stream.substream(i).engine();
    const auto partners = sample_batch(state.n_agents, batch_size, i, rng);
    const double* xi = state.x.data() + i * d;
    std::normal_distribution<double> gauss;
    double drift[kMaxDim] = {0.0, 0.0};
    double noise[kMaxDim] = {0.0, 0.0};
    for (const auto j : partners) {
      const PairTerms terms = pair_terms(kernels, xi, state.x.data() + j * d, d, i);
      for (int c = 0; c < d; ++c) {
        drift[c] += terms.drift[c];
        if (noise_law == BatchNoise::per_partner)
          noise[c] += terms.amplitude[c] * gauss(rng);
        else
          noise[c] += terms.amplitude[c] * terms.amplitude[c];
      }
    }
    for (int c = 0; c < d; ++c) {
      const double fluct = noise_law == BatchNoise::per_partner
                               ? sqdt * inv * noise[c]
                               : std::sqrt(dt * inv * noise[c]) * gauss(rng);
      next.x[i * d + c] = xi[c] + dt * inv * drift[c] + fluct;
    }
  });
  return next;
}

ParticleState step_full(const ParticleState& state, const KernelSpec& kernels, double dt,
                        const RandomStream& stream) {
  check_state(state);
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  if (state.n_agents < 2) throw ConfigError("full interaction needs N >= 2");
  const int d = state.dim;
  const std::size_t n = state.n_agents;
  const double sqdt = std::sqrt(dt);
  const double inv = 1.0 / static_cast<double>(n - 1);
  ParticleState next{state.t + dt, n, d, state.x};
  parallel_for(n, [&](std::size_t i) {
    auto rng = stream.substream(i).engine();
    std::normal_distribution<double> gauss;
    const double* xi = state.x.data() + i * d;
    double drift[kMaxDim] = {0.0, 0.0};
    double noise[kMaxDim] = {0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const PairTerms terms = pair_terms(kernels, xi, state.x.data() + j * d, d, i);
      for (int c = 0; c < d; ++c) {
        drift[c] += terms.drift[c];
        noise[c] += terms.amplitude[c] * gauss(rng);
      }
    }
    for (int c = 0; c < d; ++c)
      next.x[i * d + c] = xi[c] + dt * inv * drift[c] + sqdt * inv * noise[c];
  });
  return next;
}

ParticleState initial_state(const SimConfig& config) {
  ParticleState state{0.0, config.n_agents, config.dim, {}};
  if (!config.initial_samples.empty()) {
    state.x = config.initial_samples;
  } else {
    auto rng = RandomStream(config.seed).substream(stream_tag::initial).engine();
    std::uniform_real_distribution<double> uniform(config.initial_law.lo, config.initial_law.hi);
    state.x.resize(config.n_agents * static_cast<std::size_t>(config.dim));
    for (auto& v : state.x) v = uniform(rng);
  }
  state.validate();
  if (config.domain_half_width) {
    const double half = *config.domain_half_width;
    for (double v : state.x)
      if (std::abs(v) > half) throw ConfigError("initial state leaves the declared domain box");
  }
  return state;
}

TrajectoryDataset simulate_from(const ParticleState& initial, const SimConfig& config,
                                const KernelSpec& kernels, Scheme scheme) {
  config.validate(scheme);
  initial.validate();
  if (initial.n_agents != config.n_agents || initial.dim != config.dim)
    throw ConfigError("initial state does not match the simulation configuration");

  const RandomStream root(config.seed);
  const RandomStream pairing_root = root.substream(stream_tag::pairing);
  const RandomStream noise_root = root.substream(stream_tag::noise);

  TrajectoryDataset data;
  data.n_agents = config.n_agents;
  data.dim = config.dim;
  data.dt = config.dt;
  data.seed = config.seed;
  data.frames.reserve(config.snapshots);
  data.frames.push_back(initial.x);

  ParticleState state = initial;
  state.t = 0.0;
  for (std::size_t n = 0; n < config.snapshots; ++n) {
    PairingPlan plan;
    if (scheme == Scheme::binary) {
      // S^n is drawn for every snapshot so the file carries M plans; the last
      // one is never applied.
      auto rng = pairing_root.substream(n).engine();
      plan = sample_pairing(config.n_agents, rng);
    }
    if (n + 1 < config.snapshots) {
      const RandomStream noise = noise_root.substream(n);
      switch (scheme) {
        case Scheme::binary: state = step_binary(state, plan, kernels, config.dt, noise); break;
        case Scheme::batch:
          state = step_batch(state, kernels, config.batch_size, config.dt, noise, config.batch_noise);
          break;
        case Scheme::full: state = step_full(state, kernels, config.dt, noise); break;
      }
      state.t = static_cast<double>(n + 1) * config.dt;
      data.frames.push_back(state.x);
    }
    if (scheme == Scheme::binary) data.pairings.push_back(std::move(plan));
  }
  return data;
}

TrajectoryDataset simulate(const SimConfig& config, const KernelSpec& kernels, Scheme scheme) {
  config.validate(scheme);
  return simulate_from(initial_state(config), config, kernels, scheme);
}

TrajectoryDataset simulate_reconstructed(const TrajectoryDataset& data,
                                         const KernelEstimate& estimate, Scheme scheme,
                                         std::size_t batch_size, std::uint64_t seed) {
  if (data.snapshots() == 0) throw ConfigError("dataset has no snapshots");
  SimConfig config;
  config.n_agents = data.n_agents;
  config.dim = data.dim;
  config.dt = data.dt;
  config.snapshots = data.snapshots();
  config.batch_size = batch_size;
  config.seed = seed;
  config.batch_noise = BatchNoise::pooled_variance;
  return simulate_from(data.state(0), config, to_kernel_spec(estimate), scheme);
}

} // namespace kdisc
