#pragma once

#include "kdisc/dynamics.hpp"

#include <filesystem>
#include <iosfwd>

namespace kdisc {

// Binary trajectory container, all fields little-endian:
//   "KDTRJ1" | N:u64 | d:u8 | M:u64 | dt:f64 | has_pairings:u8 | seed:u64
//   M frames of d*N f64
//   M frames of N u32 partner indices (0-based), only if has_pairings
void write_trajectory(std::ostream& out, const TrajectoryDataset& data);
void write_trajectory(const std::filesystem::path& path, const TrajectoryDataset& data);
TrajectoryDataset read_trajectory(std::istream& in);
TrajectoryDataset read_trajectory(const std::filesystem::path& path);

// One row per agent per snapshot: n,t,i,x_1[,x_2]. Values are printed with
// max_digits10 so the export is lossless.
void write_trajectory_csv(std::ostream& out, const TrajectoryDataset& data);

} // namespace kdisc
