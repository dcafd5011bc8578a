#include <absl/container/flat_hash_set.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include "isosurface/lattice.hpp"
#include "meshforge/isosurface.hpp"
#include "meshforge/parallel.hpp"

namespace meshforge {

using detail::Coord;
using detail::corner_of;
using detail::kCornerOffset;
using detail::kEdgeCorners;
using detail::Lattice;
using detail::MeshAssembler;
using detail::VertexStore;

namespace {

bool power_of_two(int v) { return v > 0 && std::has_single_bit(static_cast<unsigned>(v)); }

void check_bounds(const Box& b) {
  const Vec3 e = b.extent();
  if (!(e.x > 0 && e.y > 0 && e.z > 0) || !std::isfinite(e.x + e.y + e.z)) {
    throw std::invalid_argument("extraction bounds must have positive finite extent");
  }
}

// Corner index sets of the six cell faces: -x, +x, -y, +y, -z, +z.
constexpr std::array<std::array<int, 4>, 6> kFaceCorners{{
    {0, 3, 4, 7}, {1, 2, 5, 6}, {0, 1, 4, 5}, {2, 3, 6, 7}, {0, 1, 2, 3}, {4, 5, 6, 7}}};

std::uint64_t cell_key(const CellCoord& c, std::int64_t res) {
  return (static_cast<std::uint64_t>(c[0]) * static_cast<std::uint64_t>(res) +
          static_cast<std::uint64_t>(c[1])) *
             static_cast<std::uint64_t>(res) +
         static_cast<std::uint64_t>(c[2]);
}

Coord cell_origin(const CellCoord& c, std::int64_t stride) {
  return {c[0] * stride, c[1] * stride, c[2] * stride};
}

std::array<std::uint64_t, 8> corner_keys(const Lattice& lat, const CellCoord& c, std::int64_t stride) {
  std::array<std::uint64_t, 8> keys{};
  const Coord o = cell_origin(c, stride);
  for (int p = 0; p < 8; ++p) keys[p] = lat.key(corner_of(o, p, stride));
  return keys;
}

int sign_mask(const VertexStore& store, const std::array<std::uint64_t, 8>& keys) {
  int mask = 0;
  for (int p = 0; p < 8; ++p) {
    if (store.positive(keys[p])) mask |= 1 << p;
  }
  return mask;
}

void append_corner_keys(const Lattice& lat, const std::vector<CellCoord>& cells, std::int64_t stride,
                        std::vector<std::uint64_t>& out) {
  out.reserve(out.size() + 8 * cells.size());
  for (const auto& c : cells) {
    for (auto k : corner_keys(lat, c, stride)) out.push_back(k);
  }
}

// Sorted cells whose corner values are already stored.
void march_cells(const Lattice& lat, const VertexStore& store, const std::vector<CellCoord>& cells,
                 MeshAssembler& assembler) {
  for (const auto& c : cells) {
    const auto keys = corner_keys(lat, c, 1);
    std::array<double, 8> raw{};
    for (int p = 0; p < 8; ++p) {
      const auto* r = store.find(keys[p]);
      if (r->state == VertexStore::State::kQueried) {
        raw[p] = r->value;
      } else {
        // Sign-only corner; never read beyond its sign for this cell.
        raw[p] = r->state == VertexStore::State::kOutside ? 1.0 : -1.0;
      }
    }
    assembler.march(cell_origin(c, 1), raw);
  }
}

// Queries what marching the finest crossing cells reads: crossing-edge
// endpoints, plus every corner of cells whose case needs the value tests.
void query_march_inputs(const Lattice& lat, VertexStore& store, const std::vector<CellCoord>& cells) {
  std::vector<std::uint64_t> need;
  for (const auto& c : cells) {
    const auto keys = corner_keys(lat, c, 1);
    const int mask = sign_mask(store, keys);
    if (detail::is_ambiguous(mask)) {
      for (auto k : keys) {
        if (!store.has_value(k)) need.push_back(k);
      }
      continue;
    }
    for (const auto& e : kEdgeCorners) {
      if (((mask >> e[0]) & 1) != ((mask >> e[1]) & 1)) {
        if (!store.has_value(keys[e[0]])) need.push_back(keys[e[0]]);
        if (!store.has_value(keys[e[1]])) need.push_back(keys[e[1]]);
      }
    }
  }
  store.query(std::move(need));
}

void finish_mesh(TriangleMesh& mesh) {
  validate(mesh);
}

std::string empty_diagnostic(const VertexStore& store, const Lattice& lat, std::int64_t stride) {
  bool any_pos = false;
  bool any_neg = false;
  const std::int64_t n = lat.resolution();
  for (std::int64_t x = 0; x <= n; x += stride) {
    for (std::int64_t y = 0; y <= n; y += stride) {
      for (std::int64_t z = 0; z <= n; z += stride) {
        (store.positive(lat.key({x, y, z})) ? any_pos : any_neg) = true;
      }
    }
  }
  if (any_pos && !any_neg) return "field is positive at every coarse grid vertex; no surface";
  if (any_neg && !any_pos) return "field is negative at every coarse grid vertex; no surface";
  return "no sign change between neighbouring coarse grid vertices";
}

// Dense evaluation of the coarse level; returns its crossing cells.
std::vector<CellCoord> coarse_level(const Lattice& lat, VertexStore& store, int d0,
                                    std::vector<CellCoord>* all_cells) {
  const std::int64_t stride = lat.resolution() / d0;
  std::vector<std::uint64_t> keys;
  keys.reserve(static_cast<std::size_t>(d0 + 1) * (d0 + 1) * (d0 + 1));
  for (std::int64_t x = 0; x <= d0; ++x) {
    for (std::int64_t y = 0; y <= d0; ++y) {
      for (std::int64_t z = 0; z <= d0; ++z) keys.push_back(lat.key({x * stride, y * stride, z * stride}));
    }
  }
  store.query(std::move(keys));

  std::vector<CellCoord> crossing;
  for (std::int32_t x = 0; x < d0; ++x) {
    for (std::int32_t y = 0; y < d0; ++y) {
      for (std::int32_t z = 0; z < d0; ++z) {
        const CellCoord c{x, y, z};
        if (all_cells != nullptr) all_cells->push_back(c);
        const int mask = sign_mask(store, corner_keys(lat, c, stride));
        if (mask != 0 && mask != 255) crossing.push_back(c);
      }
    }
  }
  return crossing;
}

// One refinement step of surface tracking: from the crossing cells of the
// parent level to every crossing cell of the child level reachable through
// faces with a sign change.
std::vector<CellCoord> track_level(const Lattice& lat, VertexStore& store,
                                   const std::vector<CellCoord>& parents, std::int64_t res,
                                   double lipschitz) {
  const std::int64_t stride = lat.resolution() / res;
  const std::int64_t pstride = 2 * stride;

  // Seeds: the child cell holding the crossing half of each crossing parent edge.
  struct EdgeSeed {
    CellCoord parent;
    int edge;
    std::uint64_t mid;
  };
  std::vector<EdgeSeed> edge_seeds;
  std::vector<std::uint64_t> mids;
  for (const auto& p : parents) {
    const auto keys = corner_keys(lat, p, pstride);
    const int mask = sign_mask(store, keys);
    const Coord o = cell_origin(p, pstride);
    for (int e = 0; e < 12; ++e) {
      const int a = kEdgeCorners[e][0];
      const int b = kEdgeCorners[e][1];
      if (((mask >> a) & 1) == ((mask >> b) & 1)) continue;
      const Coord ca = corner_of(o, a, pstride);
      Coord m = ca;
      m[detail::kEdgeAxis[e]] += stride;
      edge_seeds.push_back({p, e, lat.key(m)});
      mids.push_back(lat.key(m));
    }
  }
  store.resolve_signs(std::move(mids), stride, lipschitz);

  std::vector<CellCoord> frontier;
  for (const auto& s : edge_seeds) {
    const auto keys = corner_keys(lat, s.parent, pstride);
    const int a = kEdgeCorners[s.edge][0];
    const int axis = detail::kEdgeAxis[s.edge];
    const bool lower_half = store.positive(keys[a]) != store.positive(s.mid);
    CellCoord child{};
    for (int k = 0; k < 3; ++k) {
      child[k] = 2 * s.parent[k] + kCornerOffset[a][k];
    }
    child[axis] = 2 * s.parent[axis] + (lower_half ? 0 : 1);
    frontier.push_back(child);
  }
  std::sort(frontier.begin(), frontier.end());
  frontier.erase(std::unique(frontier.begin(), frontier.end()), frontier.end());

  absl::flat_hash_set<std::uint64_t> visited;
  for (const auto& c : frontier) visited.insert(cell_key(c, res));

  std::vector<CellCoord> crossing;
  while (!frontier.empty()) {
    std::vector<std::uint64_t> keys;
    append_corner_keys(lat, frontier, stride, keys);
    store.resolve_signs(std::move(keys), stride, lipschitz);

    std::vector<CellCoord> next;
    for (const auto& c : frontier) {
      const int mask = sign_mask(store, corner_keys(lat, c, stride));
      if (mask == 0 || mask == 255) continue;
      crossing.push_back(c);
      for (int f = 0; f < 6; ++f) {
        int bits = 0;
        for (int p : kFaceCorners[f]) bits += (mask >> p) & 1;
        if (bits == 0 || bits == 4) continue;
        CellCoord n = c;
        n[f / 2] += (f % 2 == 0) ? -1 : 1;
        if (n[f / 2] < 0 || n[f / 2] >= res) continue;
        if (visited.insert(cell_key(n, res)).second) next.push_back(n);
      }
    }
    std::sort(next.begin(), next.end());
    frontier = std::move(next);
  }
  std::sort(crossing.begin(), crossing.end());
  return crossing;
}

// Band refinement shared by subdivide_active() and extract(): children of
// every coarse cell that changes sign or lies within margin * diagonal.
ActiveCellSet subdivide_in_store(const ActiveCellSet& coarse, const Lattice& lat, VertexStore& store,
                                 double margin, std::uint64_t* active_count) {
  const std::int64_t stride = lat.resolution() / coarse.resolution;
  std::vector<std::uint64_t> keys;
  append_corner_keys(lat, coarse.cells, stride, keys);
  store.query(std::move(keys));

  const Vec3 h = lat.step() * static_cast<double>(stride);
  const double diagonal = norm(h);
  ActiveCellSet out;
  out.resolution = coarse.resolution * 2;
  std::uint64_t active = 0;
  for (const auto& c : coarse.cells) {
    const auto ck = corner_keys(lat, c, stride);
    bool neg = false;
    bool pos = false;
    double closest = INFINITY;
    for (auto k : ck) {
      const double v = store.value(k);
      (v >= 0.0 ? pos : neg) = true;
      closest = std::min(closest, std::abs(v));
    }
    if (!((pos && neg) || closest <= margin * diagonal)) continue;
    ++active;
    for (int p = 0; p < 8; ++p) {
      const auto& o = kCornerOffset[p];
      out.cells.push_back({2 * c[0] + o[0], 2 * c[1] + o[1], 2 * c[2] + o[2]});
    }
  }
  if (active_count != nullptr) *active_count = active;
  out.normalize();
  return out;
}

// Adds cells across sign-changing faces until no crossing cell has such a
// face leading outside the set, then returns the crossing cells.
std::vector<CellCoord> close_band(const Lattice& lat, VertexStore& store, std::vector<CellCoord> cells) {
  const std::int64_t res = lat.resolution();
  absl::flat_hash_set<std::uint64_t> member;
  for (const auto& c : cells) member.insert(cell_key(c, res));
  std::vector<CellCoord> crossing;
  std::vector<CellCoord> frontier = std::move(cells);
  while (!frontier.empty()) {
    std::vector<std::uint64_t> keys;
    append_corner_keys(lat, frontier, 1, keys);
    store.query(std::move(keys));
    std::vector<CellCoord> next;
    for (const auto& c : frontier) {
      const int mask = sign_mask(store, corner_keys(lat, c, 1));
      if (mask == 0 || mask == 255) continue;
      crossing.push_back(c);
      for (int f = 0; f < 6; ++f) {
        int bits = 0;
        for (int p : kFaceCorners[f]) bits += (mask >> p) & 1;
        if (bits == 0 || bits == 4) continue;
        CellCoord n = c;
        n[f / 2] += (f % 2 == 0) ? -1 : 1;
        if (n[f / 2] < 0 || n[f / 2] >= res) continue;
        if (member.insert(cell_key(n, res)).second) next.push_back(n);
      }
    }
    std::sort(next.begin(), next.end());
    frontier = std::move(next);
  }
  std::sort(crossing.begin(), crossing.end());
  return crossing;
}

}  // namespace

void ExtractionConfig::validate() const {
  if (!power_of_two(final_resolution) || final_resolution < 32) {
    throw std::invalid_argument("final_resolution must be a power of two >= 32, got " +
                                std::to_string(final_resolution));
  }
  if (!power_of_two(coarse_resolution) || coarse_resolution > final_resolution / 4) {
    throw std::invalid_argument("coarse_resolution must be a power of two <= final_resolution / 4, got " +
                                std::to_string(coarse_resolution));
  }
  if (!(activity_margin > 0.0) || !std::isfinite(activity_margin)) {
    throw std::invalid_argument("activity_margin must be positive and finite");
  }
  if (expansion_radius < 0) throw std::invalid_argument("expansion_radius must be >= 0");
  check_bounds(bounds);
}

bool ActiveCellSet::contains(const CellCoord& c) const {
  return std::binary_search(cells.begin(), cells.end(), c);
}

void ActiveCellSet::normalize() {
  for (const auto& c : cells) {
    for (auto v : c) {
      if (v < 0 || v >= resolution) {
        throw std::out_of_range("cell coordinate " + std::to_string(v) + " outside level resolution " +
                                std::to_string(resolution));
      }
    }
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
}

ActiveCellSet subdivide_active(const ActiveCellSet& coarse, const ScalarField& field, double margin,
                               const Box& bounds, std::uint64_t* queries) {
  if (coarse.resolution <= 0) throw std::invalid_argument("subdivide_active: empty level");
  check_bounds(bounds);
  const Lattice lat(coarse.resolution, bounds);
  VertexStore store(field, lat, 0);
  ActiveCellSet in = coarse;
  in.normalize();
  ActiveCellSet out = subdivide_in_store(in, lat, store, margin, nullptr);
  if (queries != nullptr) *queries += store.queries();
  return out;
}

ActiveCellSet expand_active(const ActiveCellSet& cells, int radius) {
  if (radius < 0) throw std::invalid_argument("expand_active: radius must be >= 0");
  ActiveCellSet out;
  out.resolution = cells.resolution;
  if (radius == 0) {
    out.cells = cells.cells;
    out.normalize();
    return out;
  }
  const std::int32_t n = cells.resolution;
  for (const auto& c : cells.cells) {
    for (std::int32_t dx = -radius; dx <= radius; ++dx) {
      for (std::int32_t dy = -radius; dy <= radius; ++dy) {
        for (std::int32_t dz = -radius; dz <= radius; ++dz) {
          const CellCoord m{c[0] + dx, c[1] + dy, c[2] + dz};
          if (m[0] < 0 || m[1] < 0 || m[2] < 0 || m[0] >= n || m[1] >= n || m[2] >= n) continue;
          out.cells.push_back(m);
        }
      }
    }
  }
  out.normalize();
  return out;
}

std::vector<std::array<Vec3, 3>> march_cell(const std::array<double, 8>& corner_values,
                                            const Vec3& cell_origin, double cell_size) {
  if (!(cell_size > 0.0)) throw std::invalid_argument("march_cell: cell_size must be positive");
  for (double v : corner_values) {
    if (!std::isfinite(v)) throw std::invalid_argument("march_cell: non-finite corner value");
  }
  const Lattice lat(1, Box{cell_origin, cell_origin + Vec3{cell_size, cell_size, cell_size}});
  MeshAssembler assembler(lat);
  assembler.march({0, 0, 0}, corner_values);
  const TriangleMesh mesh = assembler.take();
  std::vector<std::array<Vec3, 3>> out;
  out.reserve(mesh.triangles.size());
  for (const auto& t : mesh.triangles) {
    out.push_back({mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]});
  }
  return out;
}

ExtractionResult extract(const ScalarField& field, const ExtractionConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const int D = cfg.final_resolution;
  const Lattice lat(D, cfg.bounds);
  VertexStore store(field, lat, cfg.workers);
  ExtractionResult result;
  auto& stats = result.stats;
  const auto side = static_cast<std::uint64_t>(D) + 1;
  stats.dense_equivalent = side * side * side;

  std::vector<CellCoord> finest;
  if (cfg.refinement == Refinement::kSurfaceTracking) {
    std::vector<CellCoord> crossing = coarse_level(lat, store, cfg.coarse_resolution, nullptr);
    stats.active_per_level.push_back(crossing.size());
    if (crossing.empty()) {
      stats.diagnostic = empty_diagnostic(store, lat, D / cfg.coarse_resolution);
    } else {
      for (std::int64_t res = 2 * cfg.coarse_resolution; res <= D; res *= 2) {
        crossing = track_level(lat, store, crossing, res, cfg.activity_margin);
        stats.active_per_level.push_back(crossing.size());
      }
      finest = std::move(crossing);
    }
  } else {
    ActiveCellSet level;
    level.resolution = cfg.coarse_resolution;
    const std::vector<CellCoord> coarse_crossing = coarse_level(lat, store, cfg.coarse_resolution, &level.cells);
    for (; level.resolution < D;) {
      std::uint64_t active = 0;
      level = subdivide_in_store(level, lat, store, cfg.activity_margin, &active);
      stats.active_per_level.push_back(active);
    }
    level = expand_active(level, cfg.expansion_radius);
    finest = close_band(lat, store, std::move(level.cells));
    stats.active_per_level.push_back(finest.size());
    if (finest.empty() && coarse_crossing.empty()) {
      stats.diagnostic = empty_diagnostic(store, lat, D / cfg.coarse_resolution);
    }
  }

  query_march_inputs(lat, store, finest);
  MeshAssembler assembler(lat);
  march_cells(lat, store, finest, assembler);
  result.mesh = assembler.take();
  finish_mesh(result.mesh);
  stats.empty_surface = result.mesh.triangles.empty();
  if (stats.empty_surface && stats.diagnostic.empty()) {
    stats.diagnostic = "no surface reached at the final resolution";
  }
  stats.queries_total = store.queries();
  stats.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

ExtractionResult extract_dense(const ScalarField& field, int resolution, const Box& bounds,
                               std::size_t workers) {
  if (!power_of_two(resolution)) {
    throw std::invalid_argument("extract_dense: resolution must be a power of two");
  }
  check_bounds(bounds);
  const auto start = std::chrono::steady_clock::now();
  const Lattice lat(resolution, bounds);
  const std::int64_t n = resolution;
  const auto side = static_cast<std::size_t>(n + 1);

  auto plane = [&](std::int64_t x) {
    std::vector<Vec3> pts;
    pts.reserve(side * side);
    for (std::int64_t y = 0; y <= n; ++y) {
      for (std::int64_t z = 0; z <= n; ++z) pts.push_back(lat.point({x, y, z}));
    }
    std::vector<double> values(pts.size());
    evaluate_parallel(field, pts, values, workers);
    for (double v : values) {
      if (!std::isfinite(v)) throw std::runtime_error("field returned a non-finite value");
    }
    return values;
  };

  MeshAssembler assembler(lat);
  std::vector<double> lo = plane(0);
  bool any_pos = false;
  bool any_neg = false;
  std::uint64_t crossing = 0;
  for (std::int64_t x = 0; x < n; ++x) {
    std::vector<double> hi = plane(x + 1);
    for (std::int64_t y = 0; y < n; ++y) {
      for (std::int64_t z = 0; z < n; ++z) {
        std::array<double, 8> raw{};
        int positive = 0;
        for (int p = 0; p < 8; ++p) {
          const auto& o = kCornerOffset[p];
          const auto& src = o[0] == 0 ? lo : hi;
          raw[p] = src[static_cast<std::size_t>(y + o[1]) * side + static_cast<std::size_t>(z + o[2])];
          (raw[p] >= 0.0 ? any_pos : any_neg) = true;
          positive += raw[p] >= 0.0 ? 1 : 0;
        }
        if (positive != 0 && positive != 8) ++crossing;
        assembler.march({x, y, z}, raw);
      }
    }
    lo = std::move(hi);
  }

  ExtractionResult result;
  result.mesh = assembler.take();
  finish_mesh(result.mesh);
  auto& stats = result.stats;
  stats.dense_equivalent = static_cast<std::uint64_t>(side) * side * side;
  stats.queries_total = stats.dense_equivalent;
  stats.active_per_level.push_back(crossing);
  stats.empty_surface = result.mesh.triangles.empty();
  if (stats.empty_surface) {
    stats.diagnostic = any_pos && !any_neg   ? "field is positive at every grid vertex; no surface"
                       : any_neg && !any_pos ? "field is negative at every grid vertex; no surface"
                                             : "no sign change between neighbouring grid vertices";
  }
  stats.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace meshforge
