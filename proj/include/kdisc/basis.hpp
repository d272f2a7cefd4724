#pragma once

#include "kdisc/kernels.hpp"

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace kdisc {

enum class MeshKind { uniform, chebyshev };

std::string_view to_string(MeshKind kind);
MeshKind parse_mesh_kind(std::string_view name);

// The (at most) two hat functions that are nonzero at a point: phi_index has
// value `left`, phi_{index+1} has value `right`, and left + right == 1.
struct HatWeights {
  std::size_t index;
  double left;
  double right;
};

// Piecewise-linear hat functions on a strictly increasing mesh. Evaluation
// outside [lower, upper] is clamped to the nearest endpoint.
class BasisFamily {
public:
  BasisFamily() : BasisFamily({0.0, 1.0}, MeshKind::uniform) {}
  BasisFamily(std::vector<double> nodes, MeshKind kind);

  static BasisFamily make(double a, double b, std::size_t count, MeshKind kind);

  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
  [[nodiscard]] const std::vector<double>& nodes() const noexcept { return nodes_; }
  [[nodiscard]] double lower() const noexcept { return nodes_.front(); }
  [[nodiscard]] double upper() const noexcept { return nodes_.back(); }
  [[nodiscard]] MeshKind kind() const noexcept { return kind_; }

  [[nodiscard]] HatWeights locate(double r) const noexcept;
  [[nodiscard]] std::vector<double> eval(double r) const;
  void eval(double r, std::span<double> out) const;

  // sum_k coeffs[k] * phi_k(r)
  [[nodiscard]] double combine(std::span<const double> coeffs, double r) const;

private:
  std::vector<double> nodes_;
  MeshKind kind_;
  bool uniform_spacing_;
};

// Learned kernels: P(r) = sum rho_k phi_k(r) and D^2 = 2 sum zeta_k psi_k.
// `zeta` holds one coefficient vector per diffusion channel: a single channel
// for the pairwise modes, one per state component for local_state.
struct KernelEstimate {
  BasisFamily drift_basis;
  Eigen::VectorXd rho;
  BasisFamily diff_basis;
  std::vector<Eigen::VectorXd> zeta;
  DiffusionMode mode = DiffusionMode::pairwise_radial;

  [[nodiscard]] double drift(double r) const;
  [[nodiscard]] double diffusion_squared(double arg, std::size_t channel = 0) const;
  // sqrt(max(D^2, 0)); floating point can undershoot zero slightly.
  [[nodiscard]] double diffusion(double arg, std::size_t channel = 0) const;
};

KernelSpec to_kernel_spec(const KernelEstimate& estimate);

nlohmann::json to_json(const KernelEstimate& estimate);
KernelEstimate kernel_estimate_from_json(const nlohmann::json& doc);

} // namespace kdisc
