#include "isosurface/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace meshforge::detail {

Lattice::Lattice(int resolution, const Box& bounds)
    : resolution_(resolution),
      bounds_(bounds),
      side_(static_cast<std::uint64_t>(resolution) + 1) {
  const Vec3 ext = bounds.extent();
  step_ = ext / static_cast<double>(resolution);
  epsilon_ = 1e-12 * std::max({step_.x, step_.y, step_.z});
}

Vec3 Lattice::point(const Coord& c) const {
  const double d = static_cast<double>(resolution_);
  const Vec3 ext = bounds_.extent();
  return {bounds_.lo.x + ext.x * (static_cast<double>(c[0]) / d),
          bounds_.lo.y + ext.y * (static_cast<double>(c[1]) / d),
          bounds_.lo.z + ext.z * (static_cast<double>(c[2]) / d)};
}

void VertexStore::query(std::vector<std::uint64_t> keys) {
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  std::erase_if(keys, [&](std::uint64_t k) { return has_value(k); });
  if (keys.empty()) return;

  std::vector<Vec3> points(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) points[i] = lattice_.point(lattice_.coord(keys[i]));
  std::vector<double> values(keys.size());
  evaluate_parallel(field_, points, values, workers_);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw std::runtime_error("field returned a non-finite value at lattice vertex " +
                               std::to_string(keys[i]));
    }
    records_[keys[i]] = Record{values[i], State::kQueried};
  }
  queries_ += keys.size();
}

void VertexStore::resolve_signs(std::vector<std::uint64_t> keys, std::int64_t stride,
                                double lipschitz) {
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  const std::int64_t parent = 2 * stride;
  const std::int64_t last = lattice_.resolution();
  const Vec3& h = lattice_.step();

  std::vector<std::uint64_t> pending;
  for (const std::uint64_t k : keys) {
    if (records_.contains(k)) continue;
    const Coord w = lattice_.coord(k);
    // Keep the largest guaranteed distance from zero so this vertex can
    // certify its own children later.
    double best = 0.0;
    State best_state = State::kQueried;
    if (parent <= last) {
      Coord base{};
      for (int a = 0; a < 3; ++a) base[a] = std::min(w[a] / parent * parent, last - parent);
      for (int corner = 0; corner < 8; ++corner) {
        const Coord c = corner_of(base, corner, parent);
        if (c == w) continue;
        const Record* r = find(lattice_.key(c));
        if (r == nullptr) continue;
        const double dx = static_cast<double>(w[0] - c[0]) * h.x;
        const double dy = static_cast<double>(w[1] - c[1]) * h.y;
        const double dz = static_cast<double>(w[2] - c[2]) * h.z;
        const double reach = lipschitz * std::sqrt(dx * dx + dy * dy + dz * dz) * (1.0 + 1e-9);
        const double bound = std::abs(r->value) - reach;
        if (bound > best) {
          best = bound;
          const bool outside = r->state == State::kQueried ? r->value > 0 : r->state == State::kOutside;
          best_state = outside ? State::kOutside : State::kInside;
        }
      }
    }
    if (best_state != State::kQueried) {
      records_[k] = Record{best_state == State::kOutside ? best : -best, best_state};
      continue;
    }
    pending.push_back(k);
  }
  query(std::move(pending));
}

Vec3 MeshAssembler::edge_point(const Coord& origin, int edge, const std::array<double, 8>& v) const {
  const int a = kEdgeCorners[static_cast<std::size_t>(edge)][0];
  const int b = kEdgeCorners[static_cast<std::size_t>(edge)][1];
  const Vec3 pa = lattice_.point(corner_of(origin, a, 1));
  const Vec3 pb = lattice_.point(corner_of(origin, b, 1));
  const double t = v[a] / (v[a] - v[b]);
  return pa + (pb - pa) * t;
}

std::uint32_t MeshAssembler::edge_vertex(const Coord& origin, int edge,
                                         const std::array<double, 8>& v) {
  const int a = kEdgeCorners[static_cast<std::size_t>(edge)][0];
  const std::uint64_t key =
      lattice_.key(corner_of(origin, a, 1)) * 3 + static_cast<std::uint64_t>(kEdgeAxis[edge]);
  auto [it, inserted] = edge_vertices_.try_emplace(key, 0u);
  if (inserted) {
    it->second = static_cast<std::uint32_t>(mesh_.vertices.size());
    mesh_.vertices.push_back(edge_point(origin, edge, v));
  }
  return it->second;
}

void MeshAssembler::march(const Coord& origin, const std::array<double, 8>& raw) {
  std::array<double, 8> v{};
  for (int p = 0; p < 8; ++p) v[p] = raw[p] == 0.0 ? lattice_.epsilon() : raw[p];
  const int index = cube_index(v);
  if (index == 0 || index == 255) return;

  std::array<std::int8_t, 36> codes{};
  const int count = triangulate(v, codes);
  std::uint32_t center = 0;
  bool has_center = false;
  for (int i = 0; i < 3 * count; ++i) {
    if (codes[i] == kCenterCode && !has_center) {
      Vec3 sum{};
      int crossings = 0;
      for (int e = 0; e < 12; ++e) {
        const int a = kEdgeCorners[e][0];
        const int b = kEdgeCorners[e][1];
        if ((v[a] > 0) != (v[b] > 0)) {
          sum += edge_point(origin, e, v);
          ++crossings;
        }
      }
      center = static_cast<std::uint32_t>(mesh_.vertices.size());
      mesh_.vertices.push_back(sum / static_cast<double>(crossings));
      has_center = true;
    }
  }
  for (int t = 0; t < count; ++t) {
    Triangle tri{};
    for (int j = 0; j < 3; ++j) {
      const int code = codes[3 * t + j];
      tri[j] = code == kCenterCode ? center : edge_vertex(origin, code, v);
    }
    mesh_.triangles.push_back(tri);
  }
}

}  // namespace meshforge::detail
