#include <json.hpp>

#include "meshforge/isosurface.hpp"
#include "meshforge/meshkit.hpp"

namespace meshforge {

namespace {

std::vector<Vec3> referenced_vertices(const TriangleMesh& mesh) {
  std::vector<bool> used(mesh.vertices.size(), mesh.triangles.empty());
  for (const auto& t : mesh.triangles) {
    for (auto v : t) used.at(v) = true;
  }
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    if (used[i]) out.push_back(mesh.vertices[i]);
  }
  return out;
}

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

}  // namespace

std::pair<TriangleMesh, NormalizationTransform> normalize_to_unit_sphere(const TriangleMesh& mesh) {
  const std::vector<Vec3> points = referenced_vertices(mesh);
  if (points.empty()) throw std::invalid_argument("normalize: mesh has no vertices");
  const BoundingSphere s = welzl_sphere(points);
  if (!(s.radius > 0.0)) throw std::invalid_argument("normalize: all vertices coincide (radius 0)");
  NormalizationTransform tf{s.center, 1.0 / s.radius};
  TriangleMesh out = mesh;
  for (auto& v : out.vertices) v = tf.apply(v);
  out.normals = mesh.normals;
  return {std::move(out), tf};
}

MeshStats compute_stats(const TriangleMesh& mesh, std::size_t material_count) {
  MeshStats s;
  s.face_count = mesh.triangles.size();
  s.polygon_count = mesh.triangles.size();
  s.vertex_count = mesh.vertices.size();
  s.material_count = material_count;
  s.bbox = bounding_box(mesh);
  if (!mesh.vertices.empty()) s.sphere = welzl_sphere(referenced_vertices(mesh));
  if (!mesh.triangles.empty()) {
    const WatertightReport r = verify_watertight(mesh);
    s.boundary_edges = r.boundary_edge_count;
    s.non_manifold_edges = r.non_manifold_edge_count;
  }
  return s;
}

MeshStats compute_stats(const ObjData& obj) {
  MeshStats s = compute_stats(obj.mesh, obj.materials.size());
  s.polygon_count = obj.polygon_count;
  return s;
}

FilterVerdict filter_mesh(const MeshStats& stats, const FilterRules& rules) {
  FilterVerdict v;
  if (stats.face_count < rules.min_faces || stats.face_count > rules.max_faces) {
    v.reasons.push_back({"face_count", stats.face_count});
  }
  if (stats.material_count > rules.max_materials) v.reasons.push_back({"material_count", stats.material_count});
  v.accepted = v.reasons.empty();
  v.not_evaluated.push_back("pure_color");
  return v;
}

std::string stats_to_json(const MeshStats& s) {
  nlohmann::json j;
  j["face_count"] = s.face_count;
  j["face_count_basis"] = "triangles";
  j["polygon_count"] = s.polygon_count;
  j["vertex_count"] = s.vertex_count;
  j["material_count"] = s.material_count;
  j["boundary_edges"] = s.boundary_edges;
  j["non_manifold_edges"] = s.non_manifold_edges;
  if (!s.bbox.empty()) j["bbox"] = {{"min", vec_json(s.bbox.lo)}, {"max", vec_json(s.bbox.hi)}};
  j["bounding_sphere"] = {{"center", vec_json(s.sphere.center)}, {"radius", s.sphere.radius}};
  return j.dump(2);
}

std::string verdict_to_json(const FilterVerdict& v) {
  nlohmann::json j;
  j["accepted"] = v.accepted;
  j["reasons"] = nlohmann::json::array();
  for (const auto& r : v.reasons) j["reasons"].push_back(r.to_string());
  j["not_evaluated"] = v.not_evaluated;
  return j.dump(2);
}

}  // namespace meshforge
