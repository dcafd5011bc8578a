#pragma once

#include <array>
#include <cstdint>

namespace meshforge::detail {

/// Edge e joins cell corners kEdgeCorners[e][0] (lower) and [1] (upper).
inline constexpr std::array<std::array<int, 2>, 12> kEdgeCorners{{
    {0, 1}, {1, 2}, {3, 2}, {0, 3}, {4, 5}, {5, 6}, {7, 6}, {4, 7}, {0, 4}, {1, 5}, {2, 6}, {3, 7}}};

/// Axis along which each edge runs.
inline constexpr std::array<int, 12> kEdgeAxis{0, 1, 0, 1, 0, 1, 0, 1, 2, 2, 2, 2};

inline constexpr std::array<std::array<int, 3>, 8> kCornerOffset{{
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}}};

/// Edge code for the vertex placed at the mean of the cell's edge crossings.
inline constexpr int kCenterCode = 12;

/// Bit p set when corner p is on the positive side (value > 0).
int cube_index(const std::array<double, 8>& v);

/// True when the triangulation of this cube index depends on corner values
/// beyond the signs and the crossing-edge endpoints.
bool is_ambiguous(int cube_index);

/// Writes up to 12 triangles as triples of edge codes (0-11, or kCenterCode)
/// into `codes`, counter-clockwise when seen from the positive side. Returns
/// the triangle count. No corner value may be exactly zero.
int triangulate(const std::array<double, 8>& v, std::array<std::int8_t, 36>& codes);

}  // namespace meshforge::detail
