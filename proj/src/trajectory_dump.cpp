#include "squeezelab/trajectory_dump.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>

namespace squeezelab {

namespace {

template <class T>
void put_le(std::ofstream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <class T>
T get_le(const unsigned char* p) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

TrajectoryDumpWriter::TrajectoryDumpWriter(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
  if (!out_) throw Error(ErrorKind::io_failure, "cannot open dump '" + path.string() + "'");
  out_.write(kDumpMagic, sizeof kDumpMagic);
  put_le<std::uint32_t>(out_, kDumpVersion);
  put_le<std::uint32_t>(out_, kDumpRecordBytes);
}

void TrajectoryDumpWriter::write(const TrajectoryRecord& r) {
  put_le<std::uint32_t>(out_, r.trajectory);
  put_le<std::uint64_t>(out_, r.step);
  for (const cplx& z : {r.x.a1, r.x.a1p, r.x.a2, r.x.a2p}) {
    put_le<double>(out_, z.real());
    put_le<double>(out_, z.imag());
  }
}

void TrajectoryDumpWriter::close() {
  out_.close();
  if (!out_) throw Error(ErrorKind::io_failure, "failed writing dump '" + path_.string() + "'");
}

std::vector<TrajectoryRecord> read_trajectory_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io_failure, "cannot open dump '" + path.string() + "'");
  const std::vector<unsigned char> data{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  if (data.size() < 16 || std::memcmp(data.data(), kDumpMagic, 8) != 0) {
    throw Error(ErrorKind::io_failure, "not a trajectory dump: bad magic");
  }
  const auto version = get_le<std::uint32_t>(data.data() + 8);
  const auto record_bytes = get_le<std::uint32_t>(data.data() + 12);
  if (version != kDumpVersion || record_bytes != kDumpRecordBytes) {
    throw Error(ErrorKind::io_failure, "unsupported trajectory dump version or layout");
  }
  if ((data.size() - 16) % record_bytes != 0) {
    throw Error(ErrorKind::io_failure, "truncated trajectory dump");
  }
  std::vector<TrajectoryRecord> out((data.size() - 16) / record_bytes);
  const unsigned char* p = data.data() + 16;
  for (auto& r : out) {
    r.trajectory = get_le<std::uint32_t>(p);
    r.step = get_le<std::uint64_t>(p + 4);
    double v[8];
    for (int i = 0; i < 8; ++i) v[i] = get_le<double>(p + 12 + 8 * i);
    r.x = {{v[0], v[1]}, {v[2], v[3]}, {v[4], v[5]}, {v[6], v[7]}};
    p += record_bytes;
  }
  return out;
}

}  // namespace squeezelab
