#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "meshforge/geometry.hpp"
#include "meshforge/mesh.hpp"

namespace meshforge {

/// Parse failure in a text mesh; line numbers are 1-based.
class ObjError : public std::runtime_error {
 public:
  ObjError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct ObjData {
  TriangleMesh mesh;
  /// Distinct `usemtl` names in order of first use.
  std::vector<std::string> materials;
  std::size_t polygon_count = 0;  // faces before triangulation
  /// Triangles dropped because they repeat a vertex index.
  std::size_t degenerate_triangles = 0;
};

/// OBJ subset: v, vn, vt, f (v, v/t, v//n, v/t/n; negative indices;
/// n-gons fanned as (1,2,3), (1,3,4), ...), usemtl. Other statements are
/// ignored. Throws ObjError naming the line of a malformed statement or an
/// out-of-range index.
ObjData parse_obj(std::string_view text);
ObjData load_obj(const std::filesystem::path& path);

/// One comment line, then "v x y z" with 9 significant digits and
/// 1-based "f a b c" lines.
std::string write_obj(const TriangleMesh& mesh);
void save_obj(const std::filesystem::path& path, const TriangleMesh& mesh);

/// Point samples with optional per-point attributes. Attribute arrays are
/// either empty or as long as `points`.
struct PointSet {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<std::uint8_t> labels;  // 1 inside, 0 outside
  std::vector<Vec3> displacements;

  friend bool operator==(const PointSet&, const PointSet&) = default;
};

/// binary_little_endian 1.0 with float32 x y z, then nx ny nz, uchar label
/// and float32 dx dy dz when present.
std::string write_ply(const PointSet& points);
PointSet parse_ply(std::string_view bytes);
void save_ply(const std::filesystem::path& path, const PointSet& points);
PointSet load_ply(const std::filesystem::path& path);

struct BoundingSphere {
  Vec3 center;
  double radius = 0.0;
};

/// Minimal enclosing sphere by move-to-front Welzl on a shuffled copy of
/// the input. The shuffle uses `seed`, so results are reproducible.
/// Throws std::invalid_argument on empty input.
BoundingSphere welzl_sphere(std::span<const Vec3> points, std::uint64_t seed = 0);

/// Moves the Welzl center of the referenced vertices to the origin and
/// scales the radius to 1. Throws std::invalid_argument if the mesh has no
/// vertices or they all coincide.
std::pair<TriangleMesh, NormalizationTransform> normalize_to_unit_sphere(const TriangleMesh& mesh);

struct MeshStats {
  std::size_t face_count = 0;  // after triangulation
  std::size_t vertex_count = 0;
  std::size_t material_count = 0;
  std::size_t polygon_count = 0;
  std::size_t boundary_edges = 0;
  std::size_t non_manifold_edges = 0;
  Box bbox;
  BoundingSphere sphere;
};

MeshStats compute_stats(const TriangleMesh& mesh, std::size_t material_count = 0);
MeshStats compute_stats(const ObjData& obj);

struct FilterReason {
  std::string rule;  // "face_count" or "material_count"
  std::size_t value = 0;
  std::string to_string() const { return rule + "=" + std::to_string(value); }
};

struct FilterVerdict {
  bool accepted = true;
  std::vector<FilterReason> reasons;
  /// Rules that need data this library cannot inspect.
  std::vector<std::string> not_evaluated;
};

inline constexpr std::size_t kMinFaces = 500;
inline constexpr std::size_t kMaxFaces = 80000;
inline constexpr std::size_t kMaxMaterials = 100;

struct FilterRules {
  std::size_t min_faces = kMinFaces;
  std::size_t max_faces = kMaxFaces;
  std::size_t max_materials = kMaxMaterials;
};

/// Rejects face_count outside [min_faces, max_faces] and more than
/// max_materials materials. The pure-colour rule is reported as not
/// evaluated.
FilterVerdict filter_mesh(const MeshStats& stats, const FilterRules& rules = {});

std::string stats_to_json(const MeshStats& stats);
std::string verdict_to_json(const FilterVerdict& verdict);

}  // namespace meshforge
