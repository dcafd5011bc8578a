#pragma once

#include <absl/container/flat_hash_map.h>

#include <array>
#include <cstdint>
#include <vector>

#include "isosurface/mc33.hpp"
#include "meshforge/field.hpp"
#include "meshforge/geometry.hpp"
#include "meshforge/isosurface.hpp"
#include "meshforge/mesh.hpp"

namespace meshforge::detail {

using Coord = std::array<std::int64_t, 3>;

/// Vertex lattice of the finest level. Coarser levels address the same
/// points with a stride, so every grid vertex has a single key.
class Lattice {
 public:
  Lattice(int resolution, const Box& bounds);

  int resolution() const { return resolution_; }
  const Box& bounds() const { return bounds_; }
  /// Spacing of the finest level along each axis.
  const Vec3& step() const { return step_; }
  /// Perturbation applied to exact-zero values.
  double epsilon() const { return epsilon_; }

  std::uint64_t key(const Coord& c) const {
    return (static_cast<std::uint64_t>(c[0]) * side_ + static_cast<std::uint64_t>(c[1])) * side_ +
           static_cast<std::uint64_t>(c[2]);
  }
  Coord coord(std::uint64_t key) const {
    const auto z = static_cast<std::int64_t>(key % side_);
    key /= side_;
    return {static_cast<std::int64_t>(key / side_), static_cast<std::int64_t>(key % side_), z};
  }
  Vec3 point(const Coord& c) const;

 private:
  int resolution_;
  Box bounds_;
  Vec3 step_;
  double epsilon_;
  std::uint64_t side_;
};

/// Field values and certified signs keyed by lattice vertex. Each vertex is
/// evaluated at most once; `queries()` counts evaluations.
class VertexStore {
 public:
  enum class State : std::uint8_t { kQueried, kInside, kOutside };
  /// For certified vertices `value` is a lower bound on |field| carrying
  /// the certified sign.
  struct Record {
    double value = 0.0;
    State state = State::kQueried;
  };

  VertexStore(const ScalarField& field, const Lattice& lattice, std::size_t workers)
      : field_(field), lattice_(lattice), workers_(workers) {}

  /// Evaluates every key that has no queried value yet.
  void query(std::vector<std::uint64_t> keys);

  /// Makes the sign of every key known. A vertex at level stride `stride`
  /// whose sign follows from a known corner of its parent cell (stride
  /// 2 * stride) under the Lipschitz bound is not evaluated.
  void resolve_signs(std::vector<std::uint64_t> keys, std::int64_t stride, double lipschitz);

  const Record* find(std::uint64_t key) const {
    auto it = records_.find(key);
    return it == records_.end() ? nullptr : &it->second;
  }
  bool has_value(std::uint64_t key) const {
    const Record* r = find(key);
    return r != nullptr && r->state == State::kQueried;
  }
  /// Requires a known sign. Zero counts as positive.
  bool positive(std::uint64_t key) const {
    const Record& r = records_.at(key);
    return r.state == State::kQueried ? r.value >= 0.0 : r.state == State::kOutside;
  }
  double value(std::uint64_t key) const { return records_.at(key).value; }

  std::uint64_t queries() const { return queries_; }

 private:
  const ScalarField& field_;
  const Lattice& lattice_;
  std::size_t workers_;
  absl::flat_hash_map<std::uint64_t, Record> records_;
  std::uint64_t queries_ = 0;
};

/// Marches cells of the finest level and welds vertices by edge.
class MeshAssembler {
 public:
  explicit MeshAssembler(const Lattice& lattice) : lattice_(lattice) {}

  /// `origin` is the cell's lower corner in lattice coordinates; `raw` are
  /// the corner values in the standard corner order.
  void march(const Coord& origin, const std::array<double, 8>& raw);

  TriangleMesh take() { return std::move(mesh_); }

 private:
  Vec3 edge_point(const Coord& origin, int edge, const std::array<double, 8>& v) const;
  std::uint32_t edge_vertex(const Coord& origin, int edge, const std::array<double, 8>& v);

  const Lattice& lattice_;
  absl::flat_hash_map<std::uint64_t, std::uint32_t> edge_vertices_;
  TriangleMesh mesh_;
};

inline Coord corner_of(const Coord& origin, int corner, std::int64_t stride) {
  const auto& o = kCornerOffset[static_cast<std::size_t>(corner)];
  return {origin[0] + o[0] * stride, origin[1] + o[1] * stride, origin[2] + o[2] * stride};
}

}  // namespace meshforge::detail
