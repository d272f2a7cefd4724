#include "kdisc/kernels.hpp"

#include "kdisc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kdisc {

std::string_view to_string(DiffusionMode mode) {
  switch (mode) {
    case DiffusionMode::pairwise_radial: return "pairwise_radial";
    case DiffusionMode::pairwise_radial_displacement: return "pairwise_radial_displacement";
    case DiffusionMode::local_state: return "local_state";
  }
  return "unknown";
}

DiffusionMode parse_diffusion_mode(std::string_view name) {
  if (name == "pairwise_radial") return DiffusionMode::pairwise_radial;
  if (name == "pairwise_radial_displacement") return DiffusionMode::pairwise_radial_displacement;
  if (name == "local_state") return DiffusionMode::local_state;
  throw ConfigError("unknown diffusion mode '" + std::string(name) + "'");
}

KernelSpec frozen_kernels(DiffusionMode mode) {
  KernelSpec spec;
  spec.drift = kernels::constant(0.0);
  spec.mode = mode;
  spec.diffusion = kernels::constant(0.0);
  spec.local = {kernels::constant(0.0)};
  return spec;
}

namespace kernels {

ScalarFn constant(double value) {
  return [value](double) { return value; };
}

ScalarFn bounded_confidence(double tau) {
  return [tau](double r) { return r < tau ? 1.0 : 0.0; };
}

ScalarFn attraction_repulsion() {
  return [](double r) {
    const double s = 0.1 + r;
    return (s * s - 0.05 / (s * s)) / 5.0;
  };
}

ScalarFn cucker_smale() {
  return [](double r) {
    const double q = 1.0 + r * r;
    return 1.0 / (q * q);
  };
}

ScalarFn power_law_2d() {
  return [](double r) { return (-std::pow(0.1 + r, -1.15) + r * r) / 2.0; };
}

ScalarFn pair_decay() {
  return [](double r) { return 0.25 / ((1.0 + r) * (1.0 + r)); };
}

ScalarFn opinion_local() {
  return [](double x) {
    const double q = 1.0 - x * x;
    return q * q / 2.0;
  };
}

ScalarFn anisotropic_first() {
  return [](double x) { return (1.0 - x * x) / 4.0; };
}

ScalarFn anisotropic_second() {
  return [](double x) { return std::sqrt(std::max(1.0 - x * x, 0.0)) / 5.0; };
}

ScalarFn piecewise_linear(std::vector<double> nodes, std::vector<double> values) {
  if (nodes.size() < 2 || nodes.size() != values.size())
    throw ConfigError("piecewise kernel needs >= 2 nodes and one value per node");
  if (!std::is_sorted(nodes.begin(), nodes.end()) ||
      std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end())
    throw ConfigError("piecewise kernel nodes must be strictly increasing");
  return [nodes = std::move(nodes), values = std::move(values)](double r) {
    if (r <= nodes.front()) return values.front();
    if (r >= nodes.back()) return values.back();
    const auto it = std::upper_bound(nodes.begin(), nodes.end(), r);
    const auto k = static_cast<std::size_t>(it - nodes.begin()) - 1;
    const double t = (r - nodes[k]) / (nodes[k + 1] - nodes[k]);
    return (1.0 - t) * values[k] + t * values[k + 1];
  };
}

} // namespace kernels
} // namespace kdisc
