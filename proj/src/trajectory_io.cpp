#include "kdisc/trajectory_io.hpp"

#include "kdisc/errors.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

namespace kdisc {
namespace {

constexpr std::array<char, 6> kMagic = {'K', 'D', 'T', 'R', 'J', '1'};

template <class UInt>
void put_le(std::ostream& out, UInt value) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t b = 0; b < sizeof(UInt); ++b)
    bytes[b] = static_cast<char>((value >> (8 * b)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <class UInt>
UInt get_le(std::istream& in) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw ConfigError("truncated trajectory file");
  UInt value = 0;
  for (std::size_t b = 0; b < sizeof(UInt); ++b) value |= static_cast<UInt>(bytes[b]) << (8 * b);
  return value;
}

void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_le<std::uint64_t>(in)); }

} // namespace

void write_trajectory(std::ostream& out, const TrajectoryDataset& data) {
  const std::size_t width = data.n_agents * static_cast<std::size_t>(data.dim);
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint64_t>(out, data.n_agents);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(data.dim));
  put_le<std::uint64_t>(out, data.snapshots());
  put_f64(out, data.dt);
  put_le<std::uint8_t>(out, data.has_pairings() ? 1 : 0);
  put_le<std::uint64_t>(out, data.seed);
  for (const auto& frame : data.frames) {
    if (frame.size() != width) throw ConfigError("frame length does not match d*N");
    for (double v : frame) put_f64(out, v);
  }
  if (data.has_pairings()) {
    if (data.pairings.size() != data.snapshots())
      throw ConfigError("pairing frames must match the snapshot count");
    for (const auto& plan : data.pairings) {
      if (plan.perm.size() != data.n_agents) throw ConfigError("pairing frame length does not match N");
      for (auto j : plan.perm) put_le<std::uint32_t>(out, j);
    }
  }
  if (!out) throw ConfigError("failed writing trajectory");
}

void write_trajectory(const std::filesystem::path& path, const TrajectoryDataset& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  write_trajectory(out, data);
}

TrajectoryDataset read_trajectory(std::istream& in) {
  std::array<char, 6> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ConfigError("not a trajectory file (bad magic)");
  TrajectoryDataset data;
  data.n_agents = get_le<std::uint64_t>(in);
  data.dim = get_le<std::uint8_t>(in);
  const auto snapshots = get_le<std::uint64_t>(in);
  data.dt = get_f64(in);
  const bool has_pairings = get_le<std::uint8_t>(in) != 0;
  data.seed = get_le<std::uint64_t>(in);
  if (data.dim != 1 && data.dim != 2) throw ConfigError("trajectory dimension must be 1 or 2");
  const std::size_t width = data.n_agents * static_cast<std::size_t>(data.dim);
  data.frames.assign(snapshots, std::vector<double>(width));
  for (auto& frame : data.frames)
    for (auto& v : frame) v = get_f64(in);
  if (has_pairings) {
    data.pairings.resize(snapshots);
    for (auto& plan : data.pairings) {
      plan.perm.resize(data.n_agents);
      for (auto& j : plan.perm) {
        j = get_le<std::uint32_t>(in);
        if (j >= data.n_agents) throw ConfigError("pairing index out of range");
      }
    }
  }
  return data;
}

TrajectoryDataset read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open trajectory " + path.string());
  return read_trajectory(in);
}

void write_trajectory_csv(std::ostream& out, const TrajectoryDataset& data) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << "n,t,i";
  for (int c = 1; c <= data.dim; ++c) out << ",x_" << c;
  out << '\n';
  for (std::size_t n = 0; n < data.snapshots(); ++n) {
    const auto& frame = data.frames[n];
    const double t = data.time(n);
    for (std::size_t i = 0; i < data.n_agents; ++i) {
      out << n << ',' << t << ',' << i;
      for (int c = 0; c < data.dim; ++c) out << ',' << frame[i * data.dim + c];
      out << '\n';
    }
  }
  out.precision(old_precision);
}

} // namespace kdisc
