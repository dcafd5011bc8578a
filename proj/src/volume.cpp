#include "meshforge/volume.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

#include "binary_io.hpp"

namespace meshforge {

void write_volume(std::ostream& out, const TsdfVolume& volume) {
  if (volume.values.size() != volume.voxel_count() || volume.weights.size() != volume.voxel_count()) {
    throw std::invalid_argument("write_volume: array sizes do not match the resolution");
  }
  out.write("P3VL", 4);
  detail::write_le<std::uint8_t>(out, 1);
  for (auto r : volume.resolution) detail::write_le<std::uint32_t>(out, r);
  detail::write_le<float>(out, static_cast<float>(volume.origin.x));
  detail::write_le<float>(out, static_cast<float>(volume.origin.y));
  detail::write_le<float>(out, static_cast<float>(volume.origin.z));
  detail::write_le<float>(out, static_cast<float>(volume.voxel_size));
  detail::write_le<float>(out, static_cast<float>(volume.truncation));
  for (std::size_t i = 0; i < volume.voxel_count(); ++i) {
    detail::write_le<float>(out, volume.values[i]);
    detail::write_le<float>(out, volume.weights[i]);
  }
  if (!out) throw std::runtime_error("write_volume: stream error");
}

TsdfVolume read_volume(std::istream& in) {
  detail::expect_magic(in, "P3VL");
  const auto version = detail::read_le<std::uint8_t>(in, "version");
  if (version != 1) throw std::runtime_error("volume file: unsupported version " + std::to_string(version));
  TsdfVolume v;
  for (auto& r : v.resolution) r = detail::read_le<std::uint32_t>(in, "resolution");
  v.origin.x = detail::read_le<float>(in, "origin");
  v.origin.y = detail::read_le<float>(in, "origin");
  v.origin.z = detail::read_le<float>(in, "origin");
  v.voxel_size = detail::read_le<float>(in, "voxel size");
  v.truncation = detail::read_le<float>(in, "truncation");
  const std::size_t n = v.voxel_count();
  for (std::size_t i = 0; i < n; ++i) {
    v.values.push_back(detail::read_le<float>(in, "voxel value"));
    v.weights.push_back(detail::read_le<float>(in, "voxel weight"));
  }
  return v;
}

void save_volume(const std::filesystem::path& path, const TsdfVolume& volume) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_volume(out, volume);
}

TsdfVolume load_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_volume(in);
}

}  // namespace meshforge
