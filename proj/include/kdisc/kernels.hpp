#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace kdisc {

using ScalarFn = std::function<double(double)>;

// How the stochastic amplitude of agent i depends on its interaction.
//   pairwise_radial:              D_i = D(r_i), scalar replicated over components
//   pairwise_radial_displacement: D_i = D(r_i) * (x_j - x_i), componentwise
//   local_state:                  D_{i,c} = D_c(x_{i,c}), partner-independent
enum class DiffusionMode { pairwise_radial, pairwise_radial_displacement, local_state };

std::string_view to_string(DiffusionMode mode);
DiffusionMode parse_diffusion_mode(std::string_view name);

inline bool is_pairwise(DiffusionMode mode) noexcept {
  return mode != DiffusionMode::local_state;
}

struct KernelSpec {
  ScalarFn drift;  // P(r)
  DiffusionMode mode = DiffusionMode::pairwise_radial;
  ScalarFn diffusion;          // D(r) for the pairwise modes
  std::vector<ScalarFn> local; // D_c(x_c); a single entry applies to every component

  [[nodiscard]] double local_amplitude(int component, double x) const {
    return local.size() == 1 ? local.front()(x) : local.at(static_cast<std::size_t>(component))(x);
  }
};

// Zero drift and zero diffusion in the given mode.
KernelSpec frozen_kernels(DiffusionMode mode = DiffusionMode::pairwise_radial);

namespace kernels {

ScalarFn constant(double value);
ScalarFn bounded_confidence(double tau);  // chi(r < tau)
ScalarFn attraction_repulsion();          // ((0.1+r)^2 - 0.05 (0.1+r)^-2) / 5
ScalarFn cucker_smale();                  // (1 + r^2)^-2
ScalarFn power_law_2d();                  // (-(0.1+r)^-1.15 + r^2) / 2
ScalarFn pair_decay();                    // 0.25 / (1+r)^2
ScalarFn opinion_local();                 // (1 - x^2)^2 / 2
ScalarFn anisotropic_first();             // (1 - x^2) / 4
ScalarFn anisotropic_second();            // sqrt(max(1 - x^2, 0)) / 5

// Linear interpolation through (nodes, values), constant outside the nodes.
ScalarFn piecewise_linear(std::vector<double> nodes, std::vector<double> values);

} // namespace kernels
} // namespace kdisc
