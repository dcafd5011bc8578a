#include <absl/container/flat_hash_map.h>

#include <algorithm>
#include <json.hpp>
#include <numeric>

#include "meshforge/isosurface.hpp"

namespace meshforge {

namespace {

struct EdgeUse {
  std::uint32_t count = 0;
  std::int32_t direction = 0;  // +1 per use low->high, -1 per use high->low
};

std::uint32_t find_root(std::vector<std::uint32_t>& parent, std::uint32_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

WatertightReport verify_watertight(const TriangleMesh& mesh) {
  validate(mesh);
  WatertightReport report;
  absl::flat_hash_map<std::uint64_t, EdgeUse> edges;
  edges.reserve(mesh.triangles.size() * 3 / 2 + 1);
  std::vector<std::uint32_t> degree(mesh.vertices.size(), 0);
  for (const auto& t : mesh.triangles) {
    for (int i = 0; i < 3; ++i) {
      const std::uint32_t a = t[i];
      const std::uint32_t b = t[(i + 1) % 3];
      const std::uint64_t key = (static_cast<std::uint64_t>(std::min(a, b)) << 32) | std::max(a, b);
      auto& use = edges[key];
      ++use.count;
      use.direction += a < b ? 1 : -1;
      ++degree[a];
    }
  }
  for (const auto& [key, use] : edges) {
    if (use.count == 1) {
      ++report.boundary_edge_count;
    } else if (use.count > 2) {
      ++report.non_manifold_edge_count;
    } else if (use.direction != 0) {
      ++report.inconsistent_edge_count;
    }
  }

  // A vertex is manifold when the edges opposite to it in its incident
  // triangles form one connected chain or cycle.
  std::vector<std::size_t> offset(mesh.vertices.size() + 1, 0);
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) offset[v + 1] = offset[v] + degree[v];
  std::vector<std::pair<std::uint32_t, std::uint32_t>> link(offset.back());
  std::vector<std::size_t> fill(offset.begin(), offset.end() - 1);
  for (const auto& t : mesh.triangles) {
    for (int i = 0; i < 3; ++i) link[fill[t[i]]++] = {t[(i + 1) % 3], t[(i + 2) % 3]};
  }
  std::vector<std::uint32_t> parent(mesh.vertices.size());
  std::iota(parent.begin(), parent.end(), 0u);
  std::size_t referenced = 0;
  std::vector<std::uint32_t> roots;
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (degree[v] == 0) continue;
    ++referenced;
    for (std::size_t i = offset[v]; i < offset[v + 1]; ++i) {
      parent[link[i].first] = link[i].first;
      parent[link[i].second] = link[i].second;
    }
    for (std::size_t i = offset[v]; i < offset[v + 1]; ++i) {
      const auto ra = find_root(parent, link[i].first);
      const auto rb = find_root(parent, link[i].second);
      if (ra != rb) parent[ra] = rb;
    }
    roots.clear();
    for (std::size_t i = offset[v]; i < offset[v + 1]; ++i) roots.push_back(find_root(parent, link[i].first));
    std::sort(roots.begin(), roots.end());
    const auto components = static_cast<std::size_t>(std::unique(roots.begin(), roots.end()) - roots.begin());
    // Restore a valid forest for the next vertex.
    for (std::size_t i = offset[v]; i < offset[v + 1]; ++i) {
      parent[link[i].first] = link[i].first;
      parent[link[i].second] = link[i].second;
    }
    if (components > 1) ++report.non_manifold_vertex_count;
  }

  report.euler_characteristic = static_cast<std::int64_t>(referenced) -
                                static_cast<std::int64_t>(edges.size()) +
                                static_cast<std::int64_t>(mesh.triangles.size());
  report.is_manifold = report.non_manifold_edge_count == 0 && report.non_manifold_vertex_count == 0 &&
                       report.inconsistent_edge_count == 0;
  report.is_closed = !mesh.triangles.empty() && report.boundary_edge_count == 0 &&
                     report.non_manifold_edge_count == 0 && report.inconsistent_edge_count == 0;
  return report;
}

std::string stats_to_json(const ExtractionStats& stats) {
  nlohmann::json j;
  j["queries_total"] = stats.queries_total;
  j["dense_equivalent"] = stats.dense_equivalent;
  j["per_level_active"] = stats.active_per_level;
  j["wall_time_s"] = stats.wall_time_s;
  if (stats.empty_surface) j["empty_surface"] = true;
  if (!stats.diagnostic.empty()) j["diagnostic"] = stats.diagnostic;
  return j.dump(2);
}

}  // namespace meshforge
