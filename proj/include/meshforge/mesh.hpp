#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "meshforge/geometry.hpp"

namespace meshforge {

using Triangle = std::array<std::uint32_t, 3>;

/// Indexed triangle mesh; the exchange type between all modules.
/// Triangles are counter-clockwise when seen from outside.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::vector<Vec3> normals;  // optional, per vertex

  bool empty() const { return triangles.empty(); }

  friend bool operator==(const TriangleMesh&, const TriangleMesh&) = default;
};

/// Throws std::invalid_argument if an index is out of range or a triangle
/// repeats a vertex.
void validate(const TriangleMesh& mesh);

Box bounding_box(const TriangleMesh& mesh);
double triangle_area(const TriangleMesh& mesh, const Triangle& t);
Vec3 triangle_normal(const TriangleMesh& mesh, const Triangle& t);

/// Enclosed volume via signed tetrahedra against the origin; positive for
/// outward-oriented closed meshes.
double signed_volume(const TriangleMesh& mesh);

/// Number of connected components, counting vertices joined by triangles.
/// Unreferenced vertices are ignored.
std::size_t connected_components(const TriangleMesh& mesh);

}  // namespace meshforge
