#include "kdisc/design.hpp"

#include "kdisc/errors.hpp"
#include "kdisc/parallel.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>
#include <random>
#include <string>

namespace kdisc {
namespace {

constexpr int kMaxDim = 2;

struct Source {
  double point[kMaxDim];
  double weight;
};

// Everything needed to build the rows of one snapshot.
struct BlockBuilder {
  const TrajectoryDataset& data;
  const BasisFamily& basis;
  const AssemblyOptions& options;
  Regime regime;
  const BatchPartners* partners = nullptr;
  DensityBox box{};

  [[nodiscard]] bool local() const {
    return options.kind == DesignKind::diffusion && options.mode == DiffusionMode::local_state;
  }
  [[nodiscard]] std::size_t rows_per_block() const {
    return local() ? data.n_agents : data.n_agents * static_cast<std::size_t>(data.dim);
  }
  [[nodiscard]] double scale() const {
    const double window = static_cast<double>(options.stride) * data.dt;
    return options.kind == DesignKind::drift ? window : 2.0 * window;
  }

  void build(std::size_t j, std::size_t n, RowMatrix& a, Eigen::VectorXd& y) const {
    const auto rows = static_cast<Eigen::Index>(rows_per_block());
    const auto nb = static_cast<Eigen::Index>(basis.size());
    a.setZero(rows, nb);
    y.resize(rows);
    const int d = data.dim;
    const auto& now = data.frames[n];
    const auto& later = data.frames[n + options.stride];
    const double s = scale();

    if (local()) {
      const auto c = options.channel;
      for (std::size_t i = 0; i < data.n_agents; ++i) {
        const std::size_t idx = i * d + c;
        const auto hw = basis.locate(now[idx]);
        const auto r = static_cast<Eigen::Index>(i);
        a(r, static_cast<Eigen::Index>(hw.index)) += s * hw.left;
        if (hw.index + 1 < basis.size()) a(r, static_cast<Eigen::Index>(hw.index + 1)) += s * hw.right;
        const double inc = later[idx] - now[idx];
        y[r] = inc * inc;
      }
      return;
    }

    std::vector<Source> cells;
    if (regime == Regime::mean_field) {
      const DensityGrid grid = estimate_density(data.state(n), box);
      const double vol = grid.cell_volume();
      for (std::size_t m = 0; m < grid.cells(); ++m) {
        if (grid.values[m] == 0.0) continue;
        Source src{};
        for (int c = 0; c < d; ++c) src.point[c] = grid.center(m, c);
        src.weight = grid.values[m] * vol;
        cells.push_back(src);
      }
    }

    parallel_for(data.n_agents, [&](std::size_t i) {
      const double* xi = now.data() + i * d;
      auto visit = [&](const double* xs, double w) {
        double disp[kMaxDim];
        double r2 = 0.0;
        for (int c = 0; c < d; ++c) {
          disp[c] = xs[c] - xi[c];
          r2 += disp[c] * disp[c];
        }
        const auto hw = basis.locate(std::sqrt(r2));
        const auto k0 = static_cast<Eigen::Index>(hw.index);
        const bool has_right = hw.index + 1 < basis.size();
        for (int c = 0; c < d; ++c) {
          double factor = w * s;
          if (options.kind == DesignKind::drift) factor *= disp[c];
          else if (options.mode == DiffusionMode::pairwise_radial_displacement) factor *= disp[c] * disp[c];
          const auto row = static_cast<Eigen::Index>(i * d + c);
          a(row, k0) += factor * hw.left;
          if (has_right) a(row, k0 + 1) += factor * hw.right;
        }
      };
      switch (regime) {
        case Regime::known_S: {
          const std::size_t partner = data.pairings[n].perm[i];
          visit(now.data() + partner * d, 1.0);
          break;
        }
        case Regime::batch: {
          const auto& list = (*partners)[j][i];
          const double w = 1.0 / static_cast<double>(list.size());
          for (const auto p : list) visit(now.data() + static_cast<std::size_t>(p) * d, w);
          break;
        }
        case Regime::mean_field:
          for (const auto& src : cells) visit(src.point, src.weight);
          break;
      }
      for (int c = 0; c < d; ++c) {
        const std::size_t idx = i * d + c;
        const double inc = later[idx] - now[idx];
        y[static_cast<Eigen::Index>(idx)] = options.kind == DesignKind::drift ? inc : inc * inc;
      }
    });
  }
};

void check_common(const TrajectoryDataset& data, const BasisFamily& basis, const AssemblyOptions& options) {
  if (data.dim != 1 && data.dim != 2) throw ConfigError("trajectory dimension must be 1 or 2");
  if (data.n_agents < 2) throw ConfigError("design assembly needs at least two agents");
  if (basis.size() < 2) throw ConfigError("basis needs at least two functions");
  if (options.kind == DesignKind::diffusion && options.mode == DiffusionMode::local_state &&
      options.channel >= static_cast<std::size_t>(data.dim))
    throw ConfigError("diffusion channel exceeds the state dimension");
}

DesignSystem collect(const BlockBuilder& builder, const std::vector<std::size_t>& used) {
  DesignSystem sys;
  sys.kind = builder.options.kind;
  sys.regime = builder.regime;
  sys.stride = builder.options.stride;
  sys.dt = builder.data.dt;
  sys.snapshots_used = used;
  sys.channel = builder.options.channel;
  const auto per = static_cast<Eigen::Index>(builder.rows_per_block());
  const auto nb = static_cast<Eigen::Index>(builder.basis.size());
  sys.a.resize(per * static_cast<Eigen::Index>(used.size()), nb);
  sys.y.resize(sys.a.rows());
  RowMatrix block;
  Eigen::VectorXd target;
  for (std::size_t j = 0; j < used.size(); ++j) {
    builder.build(j, used[j], block, target);
    sys.a.middleRows(static_cast<Eigen::Index>(j) * per, per) = block;
    sys.y.segment(static_cast<Eigen::Index>(j) * per, per) = target;
  }
  return sys;
}

NormalEquations reduce(const BlockBuilder& builder, const std::vector<std::size_t>& used) {
  NormalEquations total = NormalEquations::zeros(builder.basis.size());
  RowMatrix block;
  Eigen::VectorXd target;
  for (std::size_t j = 0; j < used.size(); ++j) {
    builder.build(j, used[j], block, target);
    total.accumulate(NormalEquations::from(block, target), 1.0);
  }
  return total;
}

void require_pairings(const TrajectoryDataset& data, const AssemblyOptions& options) {
  if (!data.has_pairings()) throw ConfigError("regime requires recorded S^n");
  if (options.stride != 1) throw ConfigError("the known-pairing regime uses stride 1");
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((v >> (8 * b)) & 0xFF);
  out.write(bytes, 8);
}

} // namespace

std::string_view to_string(DesignKind kind) { return kind == DesignKind::drift ? "drift" : "diffusion"; }

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::known_S: return "known_S";
    case Regime::batch: return "rbm";
    case Regime::mean_field: return "mean_field";
  }
  return "unknown";
}

Regime parse_regime(std::string_view name) {
  if (name == "known_S") return Regime::known_S;
  if (name == "rbm" || name == "batch") return Regime::batch;
  if (name == "mean_field") return Regime::mean_field;
  throw ConfigError("unknown regime '" + std::string(name) + "'");
}

double DensityGrid::cell_volume() const { return std::pow(cell_width(), dim); }

double DensityGrid::center(std::size_t cell, int component) const {
  std::size_t idx = cell;
  for (int c = 0; c < component; ++c) idx /= box.bins;
  idx %= box.bins;
  return box.lo + (static_cast<double>(idx) + 0.5) * cell_width();
}

std::size_t histogram_bin(double x, const DensityBox& box) {
  const double h = (box.hi - box.lo) / static_cast<double>(box.bins);
  const double k = std::ceil((x - box.lo) / h) - 1.0;
  if (!(k > 0.0)) return 0;
  if (k >= static_cast<double>(box.bins - 1)) return box.bins - 1;
  return static_cast<std::size_t>(k);
}

DensityGrid estimate_density(const ParticleState& state, const DensityBox& box) {
  if (box.bins < 1) throw ConfigError("histogram needs at least one bin");
  if (!(box.hi > box.lo)) throw ConfigError("histogram box must have hi > lo");
  if (state.n_agents == 0) throw ConfigError("histogram of an empty state");
  DensityGrid grid{box, state.dim, {}};
  std::size_t total = 1;
  for (int c = 0; c < state.dim; ++c) total *= box.bins;
  std::vector<std::size_t> counts(total, 0);
  for (std::size_t i = 0; i < state.n_agents; ++i) {
    std::size_t cell = 0;
    std::size_t stride = 1;
    for (int c = 0; c < state.dim; ++c) {
      cell += histogram_bin(state.x[i * state.dim + c], box) * stride;
      stride *= box.bins;
    }
    ++counts[cell];
  }
  const double norm = 1.0 / (static_cast<double>(state.n_agents) * grid.cell_volume());
  grid.values.resize(total);
  for (std::size_t m = 0; m < total; ++m) grid.values[m] = static_cast<double>(counts[m]) * norm;
  return grid;
}

std::vector<std::size_t> used_snapshots(const TrajectoryDataset& data, const AssemblyOptions& options) {
  if (options.stride < 1) throw ConfigError("stride must be at least 1");
  if (options.snapshots < 1) throw ConfigError("at least one snapshot must be used");
  if (data.snapshots() == 0 || options.snapshots * options.stride > data.snapshots() - 1)
    throw ConfigError("stride " + std::to_string(options.stride) + " with " +
                      std::to_string(options.snapshots) + " snapshots exceeds the data length M = " +
                      std::to_string(data.snapshots()));
  std::vector<std::size_t> used(options.snapshots);
  for (std::size_t j = 0; j < used.size(); ++j) used[j] = j * options.stride;
  return used;
}

BatchPartners draw_batch_partners(const TrajectoryDataset& data, const AssemblyOptions& options,
                                  std::size_t batch_size, const RandomStream& stream) {
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (data.n_agents < 2) throw ConfigError("batch sampling needs at least two agents");
  const auto used = used_snapshots(data, options);
  BatchPartners partners(used.size());
  for (std::size_t j = 0; j < used.size(); ++j) {
    const RandomStream snap = stream.substream(used[j]);
    auto& lists = partners[j];
    lists.resize(data.n_agents);
    parallel_for(data.n_agents, [&](std::size_t i) {
      auto rng = snap.substream(i).engine();
      std::uniform_int_distribution<std::uint64_t> pick(0, data.n_agents - 2);
      auto& list = lists[i];
      list.resize(batch_size);
      for (auto& p : list) {
        auto v = pick(rng);
        if (v >= i) ++v;
        p = static_cast<std::uint32_t>(v);
      }
    });
  }
  return partners;
}

DesignSystem assemble_known_S(const TrajectoryDataset& data, const BasisFamily& basis,
                              const AssemblyOptions& options) {
  check_common(data, basis, options);
  require_pairings(data, options);
  const auto used = used_snapshots(data, options);
  return collect(BlockBuilder{data, basis, options, Regime::known_S}, used);
}

DesignSystem assemble_batch(const TrajectoryDataset& data, const BasisFamily& basis,
                            const AssemblyOptions& options, const BatchPartners& partners) {
  check_common(data, basis, options);
  const auto used = used_snapshots(data, options);
  if (partners.size() != used.size()) throw ConfigError("batch partners do not match the used snapshots");
  for (const auto& lists : partners) {
    if (lists.size() != data.n_agents) throw ConfigError("batch partners do not match N");
    for (std::size_t i = 0; i < lists.size(); ++i) {
      if (lists[i].empty()) throw ConfigError("empty batch");
      for (auto p : lists[i])
        if (p >= data.n_agents || p == i) throw ConfigError("invalid batch partner");
    }
  }
  BlockBuilder builder{data, basis, options, Regime::batch};
  builder.partners = &partners;
  return collect(builder, used);
}

DesignSystem assemble_batch(const TrajectoryDataset& data, const BasisFamily& basis,
                            const AssemblyOptions& options, std::size_t batch_size,
                            const RandomStream& stream) {
  return assemble_batch(data, basis, options, draw_batch_partners(data, options, batch_size, stream));
}

DesignSystem assemble_mean_field(const TrajectoryDataset& data, const BasisFamily& basis,
                                 const AssemblyOptions& options, const DensityBox& box) {
  check_common(data, basis, options);
  const auto used = used_snapshots(data, options);
  BlockBuilder builder{data, basis, options, Regime::mean_field};
  builder.box = box;
  return collect(builder, used);
}

NormalEquations normal_known_S(const TrajectoryDataset& data, const BasisFamily& basis,
                               const AssemblyOptions& options) {
  check_common(data, basis, options);
  require_pairings(data, options);
  return reduce(BlockBuilder{data, basis, options, Regime::known_S}, used_snapshots(data, options));
}

NormalEquations normal_batch(const TrajectoryDataset& data, const BasisFamily& basis,
                             const AssemblyOptions& options, std::size_t batch_size,
                             const RandomStream& stream) {
  check_common(data, basis, options);
  const auto partners = draw_batch_partners(data, options, batch_size, stream);
  BlockBuilder builder{data, basis, options, Regime::batch};
  builder.partners = &partners;
  return reduce(builder, used_snapshots(data, options));
}

NormalEquations normal_mean_field(const TrajectoryDataset& data, const BasisFamily& basis,
                                  const AssemblyOptions& options, const DensityBox& box) {
  check_common(data, basis, options);
  BlockBuilder builder{data, basis, options, Regime::mean_field};
  builder.box = box;
  return reduce(builder, used_snapshots(data, options));
}

NormalEquations normal_equations(const DesignSystem& system) { return NormalEquations::from(system.a, system.y); }

void write_design(std::ostream& out, const DesignSystem& system) {
  put_u64(out, static_cast<std::uint64_t>(system.a.rows()));
  put_u64(out, static_cast<std::uint64_t>(system.a.cols()));
  for (Eigen::Index r = 0; r < system.a.rows(); ++r)
    for (Eigen::Index c = 0; c < system.a.cols(); ++c) put_u64(out, std::bit_cast<std::uint64_t>(system.a(r, c)));
  put_u64(out, static_cast<std::uint64_t>(system.y.size()));
  put_u64(out, 1);
  for (Eigen::Index r = 0; r < system.y.size(); ++r) put_u64(out, std::bit_cast<std::uint64_t>(system.y[r]));
  if (!out) throw ConfigError("failed writing design matrix");
}

void write_design(const std::filesystem::path& path, const DesignSystem& system) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  write_design(out, system);
}

} // namespace kdisc
