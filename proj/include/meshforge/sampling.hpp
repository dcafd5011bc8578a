#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "meshforge/mesh.hpp"
#include "meshforge/meshkit.hpp"

namespace meshforge {

enum class SampleGroup { kSpace, kSurface, kNearSurface };

/// "SPACE", "SURFACE" or "NEAR_SURFACE".
const char* group_name(SampleGroup group);

struct PointSampleSet {
  SampleGroup group = SampleGroup::kSpace;
  /// SPACE: labels (when the mesh is closed). SURFACE: normals.
  /// NEAR_SURFACE: normals and displacements.
  PointSet data;
  /// Triangle each surface sample was drawn from (not written to files).
  std::vector<std::uint32_t> source_triangle;
  std::uint64_t seed = 0;
  double bias = 0.0;
  bool labeled = false;
};

struct CurvatureWeights {
  std::vector<double> vertex_defect;    // 2*pi minus incident corner angles
  std::vector<double> triangle_weight;  // area * mean clamped corner defect
};

/// Floor and ceiling applied to |defect| before weighting.
inline constexpr double kMinDefectWeight = 1e-3;

CurvatureWeights compute_curvature(const TriangleMesh& mesh);

/// Uniform points in [-1,1]^3. Labels (1 = inside) come from a majority
/// vote of parity counts along +x, +y and +z and are only produced when the
/// mesh is closed.
PointSampleSet sample_space(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed,
                            std::size_t workers = 0);

/// Points on triangles chosen with probability proportional to
/// `weights.triangle_weight`, uniform within each triangle.
PointSampleSet sample_surface(const TriangleMesh& mesh, const CurvatureWeights& weights, std::size_t n,
                              std::uint64_t seed, std::size_t workers = 0);

/// Area-uniform surface points moved by an isotropic Gaussian of standard
/// deviation `bias`, redrawn while longer than 3 * bias.
PointSampleSet sample_near_surface(const TriangleMesh& mesh, std::size_t n, double bias, std::uint64_t seed,
                                   std::size_t workers = 0);

/// Inside test used for SPACE labels; exposed for tests.
bool inside_by_parity(const TriangleMesh& mesh, const Vec3& p);

/// Sidecar: group, n, seed, bias, labeled, inside fraction, weight stats.
std::string sample_sidecar_json(const PointSampleSet& set, const CurvatureWeights* weights = nullptr);

}  // namespace meshforge
