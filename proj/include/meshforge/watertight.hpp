#pragma once

#include <cstddef>
#include <vector>

#include "meshforge/geometry.hpp"
#include "meshforge/mesh.hpp"
#include "meshforge/volume.hpp"

namespace meshforge {

/// Half-width of the square image frame and distance of the near plane
/// from the origin.
inline constexpr double kViewExtent = 1.05;

/// Orthographic depth image. The camera looks along `forward`; depth is
/// measured from the near plane at -kViewExtent * forward. Pixel (i, j) has
/// its center at right * (-kViewExtent + (i + 0.5) * pixel_size) +
/// up * (-kViewExtent + (j + 0.5) * pixel_size).
struct DepthView {
  Vec3 right;
  Vec3 up;
  Vec3 forward;  // view direction
  int resolution = 0;
  double pixel_size = 0.0;
  std::vector<float> depth;  // row-major (j * resolution + i), +inf where nothing is hit

  float at(int i, int j) const { return depth[static_cast<std::size_t>(j) * resolution + i]; }
};

/// `count` unit directions. 12, 42, 162 and 642 give the vertices of an
/// icosahedron subdivided 0..3 times; other counts (>= 4) use a Fibonacci
/// spiral.
std::vector<Vec3> view_directions(int count);

/// Double-sided orthographic rasterization keeping the nearest hit per
/// pixel center. Requires resolution >= 64.
DepthView render_depth(const TriangleMesh& mesh, const Vec3& direction, int resolution);

/// Grayscale closing with a window x window square: a minimum filter
/// (nearer depth spreads into gaps) followed by a maximum filter. Pixels
/// beyond the image border are ignored. Throws std::invalid_argument for an
/// even or non-positive window.
DepthView close_depth(const DepthView& view, int window);

/// Fuses views into a resolution^3 volume whose voxels tile
/// [-kViewExtent, kViewExtent]^3. Per voxel and view the signed distance
/// along the ray is depth(pixel) - depth(voxel), lowered by half a voxel
/// and clamped to +-truncation; an empty pixel counts as +truncation. Views
/// in which the voxel lies more than `truncation` behind the surface are
/// occluded and skipped; a voxel occluded in every view that sees it is
/// interior (-truncation). Voxels outside every frame get weight 0 and
/// +truncation. truncation <= 0 selects 3 voxels.
TsdfVolume fuse(const std::vector<DepthView>& views, int resolution, double truncation = 0.0,
                std::size_t workers = 0);

struct WatertightConfig {
  int views = 42;
  int depth_resolution = 512;
  int volume_resolution = 256;  // power of two, >= 32
  int window = 3;
  double truncation_voxels = 3.0;
  std::size_t workers = 0;

  void validate() const;
};

/// Render, close, fuse, then extract the zero level set of the volume.
/// The input must lie in the unit ball. The fused volume is stored in
/// `volume` when given.
TriangleMesh make_watertight(const TriangleMesh& mesh, const WatertightConfig& cfg = {},
                             TsdfVolume* volume = nullptr);

}  // namespace meshforge
