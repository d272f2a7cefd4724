#include "kdisc/basis.hpp"

#include "kdisc/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace kdisc {

std::string_view to_string(MeshKind kind) {
  return kind == MeshKind::uniform ? "uniform" : "chebyshev";
}

MeshKind parse_mesh_kind(std::string_view name) {
  if (name == "uniform") return MeshKind::uniform;
  if (name == "chebyshev") return MeshKind::chebyshev;
  throw ConfigError("unknown mesh kind '" + std::string(name) + "'");
}

BasisFamily::BasisFamily(std::vector<double> nodes, MeshKind kind)
    : nodes_(std::move(nodes)), kind_(kind), uniform_spacing_(false) {
  if (nodes_.size() < 2) throw ConfigError("basis needs at least 2 nodes");
  for (std::size_t k = 0; k + 1 < nodes_.size(); ++k) {
    if (!(nodes_[k] < nodes_[k + 1]) || !std::isfinite(nodes_[k + 1]))
      throw ConfigError("basis nodes must be finite and strictly increasing");
  }
  uniform_spacing_ = kind_ == MeshKind::uniform;
}

BasisFamily BasisFamily::make(double a, double b, std::size_t count, MeshKind kind) {
  if (count < 2) throw ConfigError("basis needs N_b >= 2");
  if (!(a < b)) throw ConfigError("basis interval needs a < b");
  std::vector<double> nodes(count);
  const double last = static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k) {
    const double s = static_cast<double>(k) / last;
    if (kind == MeshKind::uniform) {
      nodes[k] = a + (b - a) * s;
    } else {
      // Chebyshev-Lobatto points, ascending.
      nodes[k] = 0.5 * (a + b) - 0.5 * (b - a) * std::cos(std::numbers::pi * s);
    }
  }
  nodes.front() = a;
  nodes.back() = b;
  if (kind == MeshKind::chebyshev && count % 2 == 1) nodes[count / 2] = 0.5 * (a + b);
  return BasisFamily(std::move(nodes), kind);
}

HatWeights BasisFamily::locate(double r) const noexcept {
  const std::size_t n = nodes_.size();
  if (!(r > nodes_.front())) return {0, 1.0, 0.0};
  if (!(r < nodes_.back())) return {n - 2, 0.0, 1.0};
  std::size_t k;
  if (uniform_spacing_) {
    const double h = (nodes_.back() - nodes_.front()) / static_cast<double>(n - 1);
    k = std::min(n - 2, static_cast<std::size_t>((r - nodes_.front()) / h));
    // Rounding in the division can land one cell off.
    if (r < nodes_[k]) --k;
    else if (k + 2 < n && r >= nodes_[k + 1]) ++k;
  } else {
    k = static_cast<std::size_t>(std::upper_bound(nodes_.begin(), nodes_.end(), r) - nodes_.begin()) - 1;
  }
  const double t = (r - nodes_[k]) / (nodes_[k + 1] - nodes_[k]);
  return {k, 1.0 - t, t};
}

void BasisFamily::eval(double r, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  const HatWeights w = locate(r);
  out[w.index] += w.left;
  out[w.index + 1] += w.right;
}

std::vector<double> BasisFamily::eval(double r) const {
  std::vector<double> out(size());
  eval(r, out);
  return out;
}

double BasisFamily::combine(std::span<const double> coeffs, double r) const {
  const HatWeights w = locate(r);
  return w.left * coeffs[w.index] + w.right * coeffs[w.index + 1];
}

double KernelEstimate::drift(double r) const {
  return drift_basis.combine({rho.data(), static_cast<std::size_t>(rho.size())}, r);
}

double KernelEstimate::diffusion_squared(double arg, std::size_t channel) const {
  const Eigen::VectorXd& z = zeta.size() == 1 ? zeta.front() : zeta.at(channel);
  return 2.0 * diff_basis.combine({z.data(), static_cast<std::size_t>(z.size())}, arg);
}

double KernelEstimate::diffusion(double arg, std::size_t channel) const {
  return std::sqrt(std::max(diffusion_squared(arg, channel), 0.0));
}

KernelSpec to_kernel_spec(const KernelEstimate& estimate) {
  auto shared = std::make_shared<const KernelEstimate>(estimate);
  KernelSpec spec;
  spec.mode = estimate.mode;
  spec.drift = [shared](double r) { return shared->drift(r); };
  if (estimate.mode == DiffusionMode::local_state) {
    for (std::size_t c = 0; c < estimate.zeta.size(); ++c)
      spec.local.push_back([shared, c](double x) { return shared->diffusion(x, c); });
    spec.diffusion = kernels::constant(0.0);
  } else {
    spec.diffusion = [shared](double r) { return shared->diffusion(r); };
  }
  return spec;
}

namespace {

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

} // namespace

nlohmann::json to_json(const KernelEstimate& estimate) {
  nlohmann::json doc;
  doc["mesh_kind"] = to_string(estimate.drift_basis.kind());
  doc["nodes"] = estimate.drift_basis.nodes();
  doc["rho"] = vector_json(estimate.rho);
  doc["diff_mesh_kind"] = to_string(estimate.diff_basis.kind());
  doc["diff_nodes"] = estimate.diff_basis.nodes();
  if (estimate.zeta.size() == 1) {
    doc["zeta"] = vector_json(estimate.zeta.front());
  } else {
    doc["zeta"] = nlohmann::json::array();
    for (const auto& z : estimate.zeta) doc["zeta"].push_back(vector_json(z));
  }
  doc["diffusion_mode"] = to_string(estimate.mode);
  doc["factor_two_convention"] = true;
  return doc;
}

KernelEstimate kernel_estimate_from_json(const nlohmann::json& doc) {
  try {
    if (!doc.value("factor_two_convention", false))
      throw ConfigError("kernel estimate must use the D^2 = 2 sum zeta psi convention");
    BasisFamily drift_basis(doc.at("nodes").get<std::vector<double>>(),
                            parse_mesh_kind(doc.at("mesh_kind").get<std::string>()));
    const auto& diff_nodes = doc.contains("diff_nodes") ? doc.at("diff_nodes") : doc.at("nodes");
    const std::string diff_kind = doc.value("diff_mesh_kind", doc.at("mesh_kind").get<std::string>());
    BasisFamily diff_basis(diff_nodes.get<std::vector<double>>(), parse_mesh_kind(diff_kind));

    std::vector<Eigen::VectorXd> zeta;
    const auto& zj = doc.at("zeta");
    if (!zj.empty() && zj.front().is_array()) {
      for (const auto& z : zj) zeta.push_back(vector_from_json(z));
    } else {
      zeta.push_back(vector_from_json(zj));
    }
    KernelEstimate estimate{std::move(drift_basis), vector_from_json(doc.at("rho")),
                            std::move(diff_basis), std::move(zeta),
                            parse_diffusion_mode(doc.at("diffusion_mode").get<std::string>())};
    if (static_cast<std::size_t>(estimate.rho.size()) != estimate.drift_basis.size())
      throw ConfigError("rho length does not match drift nodes");
    for (const auto& z : estimate.zeta)
      if (static_cast<std::size_t>(z.size()) != estimate.diff_basis.size())
        throw ConfigError("zeta length does not match diffusion nodes");
    return estimate;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed kernel estimate: ") + e.what());
  }
}

} // namespace kdisc
