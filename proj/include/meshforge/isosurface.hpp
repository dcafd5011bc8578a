#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "meshforge/field.hpp"
#include "meshforge/geometry.hpp"
#include "meshforge/mesh.hpp"

namespace meshforge {

/// How finer levels are populated from the coarser level.
enum class Refinement {
  /// Every child of an active cell is evaluated; active means a corner sign
  /// change or min |value| <= margin * cell diagonal. The finest active set
  /// is dilated by expansion_radius before marching.
  kBand,
  /// Children are reached by walking the isosurface from seeds in the active
  /// coarse cells. Corner signs that a coarser sample already decides (with
  /// |value| > margin * distance) are not queried.
  kSurfaceTracking,
};

struct ExtractionConfig {
  int final_resolution = 256;  // D
  int coarse_resolution = 32;  // d0, evaluated densely
  /// Closeness multiplier. For kBand it scales the cell diagonal in the
  /// activity test; for kSurfaceTracking it is the assumed Lipschitz bound
  /// used to decide signs without a query. 1.0 is exact for distance fields.
  double activity_margin = 1.0;
  int expansion_radius = 1;
  Box bounds = Box::cube(1.0);
  Refinement refinement = Refinement::kSurfaceTracking;
  std::size_t workers = 0;  // 0 = default_workers()

  /// Throws std::invalid_argument unless D and d0 are powers of two with
  /// D >= 32 and d0 <= D / 4, the margin is positive and finite, the
  /// expansion radius is non-negative and the bounds have positive extent.
  void validate() const;
};

using CellCoord = std::array<std::int32_t, 3>;

/// Sorted, duplicate-free cell set of one grid level.
struct ActiveCellSet {
  int resolution = 0;
  std::vector<CellCoord> cells;

  bool contains(const CellCoord& c) const;
  /// Sorts and removes duplicates; throws std::out_of_range for cells
  /// outside [0, resolution)^3.
  void normalize();
};

struct ExtractionStats {
  std::uint64_t queries_total = 0;
  std::uint64_t dense_equivalent = 0;  // (D+1)^3
  std::vector<std::uint64_t> active_per_level;
  double wall_time_s = 0.0;
  /// Set when the field has no sign change over the bounds.
  bool empty_surface = false;
  std::string diagnostic;
};

struct ExtractionResult {
  TriangleMesh mesh;
  ExtractionStats stats;
};

/// Coarse-to-fine sparse marching cubes with MC33 topology resolution.
ExtractionResult extract(const ScalarField& field, const ExtractionConfig& cfg);

/// Reference marching cubes evaluating every grid vertex at `resolution`.
/// Uses the same case tables and vertex placement as extract().
ExtractionResult extract_dense(const ScalarField& field, int resolution,
                               const Box& bounds = Box::cube(1.0), std::size_t workers = 0);

/// Children of every active cell of `coarse` (sign change among its corners
/// or min |corner value| <= margin * diagonal). Corner values are fetched
/// once per grid vertex; `queries`, when given, is incremented by the number
/// of field evaluations performed.
ActiveCellSet subdivide_active(const ActiveCellSet& coarse, const ScalarField& field,
                               double margin, const Box& bounds = Box::cube(1.0),
                               std::uint64_t* queries = nullptr);

/// 26-connected dilation by `radius` cells, clipped to the grid.
ActiveCellSet expand_active(const ActiveCellSet& cells, int radius);

/// Corner order: 0 (0,0,0), 1 (1,0,0), 2 (1,1,0), 3 (0,1,0), 4 (0,0,1),
/// 5 (1,0,1), 6 (1,1,1), 7 (0,1,1), in units of cell_size from cell_origin.
/// Returns the cell's triangles, outward (positive side) counter-clockwise.
std::vector<std::array<Vec3, 3>> march_cell(const std::array<double, 8>& corner_values,
                                            const Vec3& cell_origin, double cell_size);

struct WatertightReport {
  bool is_closed = false;
  bool is_manifold = false;
  std::size_t boundary_edge_count = 0;
  std::size_t non_manifold_edge_count = 0;
  /// Interior edges whose two triangles traverse it in the same direction.
  std::size_t inconsistent_edge_count = 0;
  /// Vertices whose incident triangles do not form a single fan.
  std::size_t non_manifold_vertex_count = 0;
  std::int64_t euler_characteristic = 0;
};

WatertightReport verify_watertight(const TriangleMesh& mesh);

/// {"queries_total", "dense_equivalent", "per_level_active", "wall_time_s"}
/// plus "empty_surface" and "diagnostic" when relevant.
std::string stats_to_json(const ExtractionStats& stats);

}  // namespace meshforge
