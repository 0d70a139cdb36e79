#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "squeezelab/params.hpp"

namespace squeezelab {

// Raw trajectory dump, little-endian throughout.
//
//   header (16 bytes)
//     0..7   magic "SQZTRAJ\0"
//     8..11  uint32 format version (1)
//     12..15 uint32 record size in bytes (76)
//   records, in trajectory order then step order
//     uint32 trajectory index
//     uint64 integration step index (counted from t = 0)
//     8 x float64: Re/Im of a1, a1p, a2, a2p
inline constexpr char kDumpMagic[8] = {'S', 'Q', 'Z', 'T', 'R', 'A', 'J', '\0'};
inline constexpr std::uint32_t kDumpVersion = 1;
inline constexpr std::uint32_t kDumpRecordBytes = 4 + 8 + 8 * 8;

struct TrajectoryRecord {
  std::uint32_t trajectory = 0;
  std::uint64_t step = 0;
  PhaseSpacePoint x;
};

class TrajectoryDumpWriter {
 public:
  explicit TrajectoryDumpWriter(const std::filesystem::path& path);
  void write(const TrajectoryRecord& r);
  void close();

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

std::vector<TrajectoryRecord> read_trajectory_dump(const std::filesystem::path& path);

}  // namespace squeezelab
