#pragma once

#include "kdisc/basis.hpp"
#include "kdisc/dynamics.hpp"
#include "kdisc/qp.hpp"
#include "kdisc/random.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace kdisc {

enum class DesignKind { drift, diffusion };
enum class Regime { known_S, batch, mean_field };

std::string_view to_string(DesignKind kind);
std::string_view to_string(Regime regime);
Regime parse_regime(std::string_view name);

// Axis-aligned box [lo, hi]^d split into bins^d equal cells.
struct DensityBox {
  double lo = -1.0;
  double hi = 1.0;
  std::size_t bins = 100;
};

// Normalized histogram: values[m] = count_m / (N |C_m|), cells numbered with
// the first component fastest.
struct DensityGrid {
  DensityBox box;
  int dim = 1;
  std::vector<double> values;

  [[nodiscard]] double cell_width() const { return (box.hi - box.lo) / static_cast<double>(box.bins); }
  [[nodiscard]] double cell_volume() const;
  [[nodiscard]] double center(std::size_t cell, int component) const;
  [[nodiscard]] std::size_t cells() const noexcept { return values.size(); }
};

// Cell index of x along one axis. Points on an interior cell face go to the
// lower cell; points outside the box are clipped to the boundary cells.
std::size_t histogram_bin(double x, const DensityBox& box);

DensityGrid estimate_density(const ParticleState& state, const DensityBox& box);

struct AssemblyOptions {
  DesignKind kind = DesignKind::drift;
  DiffusionMode mode = DiffusionMode::pairwise_radial;
  std::size_t snapshots = 1;  // M_used; snapshot j uses n_j = j * stride
  std::size_t stride = 1;     // window l of the increment X^{n+l} - X^n
  std::size_t channel = 0;    // state component for local_state diffusion
};

// Stacked regression A theta ~ y over the used snapshots. Drift rows are
// l*dt*Theta against X^{n+l} - X^n; diffusion rows are 2*l*dt*Lambda against
// the squared increments. Local-state diffusion keeps only rows of `channel`.
struct DesignSystem {
  RowMatrix a;
  Eigen::VectorXd y;
  DesignKind kind = DesignKind::drift;
  Regime regime = Regime::known_S;
  std::size_t stride = 1;
  double dt = 0.0;
  std::vector<std::size_t> snapshots_used;
  std::size_t channel = 0;
};

// Snapshot indices n_j = j*stride for j < snapshots; requires snapshots*stride <= M-1.
std::vector<std::size_t> used_snapshots(const TrajectoryDataset& data, const AssemblyOptions& options);

// partners[j][i] lists the sampled partners of agent i at the j-th used snapshot.
using BatchPartners = std::vector<std::vector<std::vector<std::uint32_t>>>;

// Independent uniform partner != i per agent and draw, from
// stream.substream(n).substream(i). Drift and diffusion assemblies that use
// the same stream see the same partners.
BatchPartners draw_batch_partners(const TrajectoryDataset& data, const AssemblyOptions& options,
                                  std::size_t batch_size, const RandomStream& stream);

DesignSystem assemble_known_S(const TrajectoryDataset& data, const BasisFamily& basis,
                              const AssemblyOptions& options);
DesignSystem assemble_batch(const TrajectoryDataset& data, const BasisFamily& basis,
                            const AssemblyOptions& options, std::size_t batch_size,
                            const RandomStream& stream);
DesignSystem assemble_batch(const TrajectoryDataset& data, const BasisFamily& basis,
                            const AssemblyOptions& options, const BatchPartners& partners);
DesignSystem assemble_mean_field(const TrajectoryDataset& data, const BasisFamily& basis,
                                 const AssemblyOptions& options, const DensityBox& box);

// Same systems reduced to A^T A, A^T y, y^T y snapshot by snapshot, without
// storing A. Results agree with normal_equations(assemble_*(...)) up to
// summation order.
NormalEquations normal_known_S(const TrajectoryDataset& data, const BasisFamily& basis,
                               const AssemblyOptions& options);
NormalEquations normal_batch(const TrajectoryDataset& data, const BasisFamily& basis,
                             const AssemblyOptions& options, std::size_t batch_size,
                             const RandomStream& stream);
NormalEquations normal_mean_field(const TrajectoryDataset& data, const BasisFamily& basis,
                                  const AssemblyOptions& options, const DensityBox& box);

NormalEquations normal_equations(const DesignSystem& system);

// Binary dump: rows:u64 | cols:u64 | rows*cols f64 row-major, little-endian,
// written for A and then for y (as a single column).
void write_design(std::ostream& out, const DesignSystem& system);
void write_design(const std::filesystem::path& path, const DesignSystem& system);

} // namespace kdisc
