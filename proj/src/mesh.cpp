#include "meshforge/mesh.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace meshforge {

void validate(const TriangleMesh& mesh) {
  const auto n = mesh.vertices.size();
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const auto& t = mesh.triangles[f];
    for (auto i : t) {
      if (i >= n) {
        throw std::invalid_argument("triangle " + std::to_string(f) + " references vertex " +
                                    std::to_string(i) + " of " + std::to_string(n));
      }
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      throw std::invalid_argument("triangle " + std::to_string(f) + " repeats a vertex");
    }
  }
  if (!mesh.normals.empty() && mesh.normals.size() != n) {
    throw std::invalid_argument("normal count does not match vertex count");
  }
}

Box bounding_box(const TriangleMesh& mesh) {
  Box box;
  for (const auto& v : mesh.vertices) box.extend(v);
  return box;
}

double triangle_area(const TriangleMesh& mesh, const Triangle& t) {
  const Vec3& a = mesh.vertices[t[0]];
  return 0.5 * norm(cross(mesh.vertices[t[1]] - a, mesh.vertices[t[2]] - a));
}

Vec3 triangle_normal(const TriangleMesh& mesh, const Triangle& t) {
  const Vec3& a = mesh.vertices[t[0]];
  return normalized(cross(mesh.vertices[t[1]] - a, mesh.vertices[t[2]] - a));
}

double signed_volume(const TriangleMesh& mesh) {
  double six_v = 0.0;
  for (const auto& t : mesh.triangles) {
    six_v += dot(mesh.vertices[t[0]], cross(mesh.vertices[t[1]], mesh.vertices[t[2]]));
  }
  return six_v / 6.0;
}

namespace {

std::uint32_t find_root(std::vector<std::uint32_t>& parent, std::uint32_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

std::size_t connected_components(const TriangleMesh& mesh) {
  std::vector<std::uint32_t> parent(mesh.vertices.size());
  std::iota(parent.begin(), parent.end(), 0u);
  std::vector<bool> used(mesh.vertices.size(), false);
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) used[t[k]] = true;
    const auto r0 = find_root(parent, t[0]);
    for (int k = 1; k < 3; ++k) {
      const auto rk = find_root(parent, t[k]);
      if (rk != r0) parent[rk] = r0;
    }
  }
  std::size_t count = 0;
  for (std::uint32_t v = 0; v < parent.size(); ++v) {
    if (used[v] && find_root(parent, v) == v) ++count;
  }
  return count;
}

}  // namespace meshforge
