#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "meshforge/geometry.hpp"

namespace meshforge {

/// Truncated signed-distance voxel grid. Voxel (i, j, k) has its center at
/// origin + voxel_size * (i + 0.5, j + 0.5, k + 0.5). Arrays are x-fastest.
struct TsdfVolume {
  std::array<std::uint32_t, 3> resolution{0, 0, 0};
  Vec3 origin;
  double voxel_size = 0.0;
  double truncation = 0.0;  // delta, world units
  std::vector<float> values;
  std::vector<float> weights;

  std::size_t voxel_count() const {
    return std::size_t{resolution[0]} * resolution[1] * resolution[2];
  }
  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return (k * resolution[1] + j) * resolution[0] + i;
  }
  Vec3 voxel_center(std::size_t i, std::size_t j, std::size_t k) const {
    return origin + Vec3{(static_cast<double>(i) + 0.5) * voxel_size,
                         (static_cast<double>(j) + 0.5) * voxel_size,
                         (static_cast<double>(k) + 0.5) * voxel_size};
  }
};

/// P3VL volume file: magic "P3VL", u8 version (1), u32 x3 resolution,
/// f32 x3 origin, f32 voxel size, f32 truncation, then (f32 value, f32 weight)
/// per voxel, x-fastest, little-endian throughout.
void write_volume(std::ostream& out, const TsdfVolume& volume);
TsdfVolume read_volume(std::istream& in);
void save_volume(const std::filesystem::path& path, const TsdfVolume& volume);
TsdfVolume load_volume(const std::filesystem::path& path);

}  // namespace meshforge
