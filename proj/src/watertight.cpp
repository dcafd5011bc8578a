#include "meshforge/watertight.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

#include "meshforge/field.hpp"
#include "meshforge/isosurface.hpp"
#include "meshforge/parallel.hpp"

namespace meshforge {

namespace {

constexpr float kNoHit = std::numeric_limits<float>::infinity();

std::vector<Vec3> icosahedron_vertices(int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p = normalized(p);
  std::vector<std::array<std::size_t, 3>> f = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> mid;
    auto midpoint = [&](std::size_t a, std::size_t b) {
      const auto key = std::minmax(a, b);
      auto [it, inserted] = mid.try_emplace(key, v.size());
      if (inserted) v.push_back(normalized(v[a] + v[b]));
      return it->second;
    };
    std::vector<std::array<std::size_t, 3>> next;
    for (const auto& tri : f) {
      const auto a = midpoint(tri[0], tri[1]);
      const auto b = midpoint(tri[1], tri[2]);
      const auto c = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  return v;
}

// Twice the signed area of (a, b, p). The endpoints are ordered first so a
// shared edge yields exactly opposite values in its two triangles.
double edge_function(double ax, double ay, double bx, double by, double px, double py) {
  if (std::tie(ax, ay) > std::tie(bx, by)) {
    return -((ax - bx) * (py - by) - (ay - by) * (px - bx));
  }
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

// Sliding min or max along rows (horizontal) or columns, window 2h+1.
template <typename Op>
std::vector<float> filter_pass(const std::vector<float>& in, int n, int h, bool horizontal, Op op) {
  std::vector<float> out(in.size());
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      float acc = in[static_cast<std::size_t>(j) * n + i];
      for (int d = -h; d <= h; ++d) {
        const int ii = horizontal ? i + d : i;
        const int jj = horizontal ? j : j + d;
        if (ii < 0 || jj < 0 || ii >= n || jj >= n) continue;
        acc = op(acc, in[static_cast<std::size_t>(jj) * n + ii]);
      }
      out[static_cast<std::size_t>(j) * n + i] = acc;
    }
  }
  return out;
}

}  // namespace

std::vector<Vec3> view_directions(int count) {
  for (int s = 0; s <= 3; ++s) {
    if (count == 10 * (1 << (2 * s)) + 2) return icosahedron_vertices(s);
  }
  if (count < 4) throw std::invalid_argument("view_directions: need at least 4 views");
  std::vector<Vec3> dirs;
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    dirs.push_back({r * std::cos(golden * i), r * std::sin(golden * i), z});
  }
  return dirs;
}

DepthView render_depth(const TriangleMesh& mesh, const Vec3& direction, int resolution) {
  if (resolution < 64) throw std::invalid_argument("render_depth: resolution must be >= 64");
  const double len = norm(direction);
  if (!(len > 0.0)) throw std::invalid_argument("render_depth: zero view direction");
  DepthView view;
  view.forward = direction / len;
  const Vec3 helper = std::abs(view.forward.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
  view.right = normalized(cross(helper, view.forward));
  view.up = cross(view.forward, view.right);
  view.resolution = resolution;
  view.pixel_size = 2.0 * kViewExtent / resolution;
  view.depth.assign(static_cast<std::size_t>(resolution) * resolution, kNoHit);

  struct Projected {
    double x, y, d;  // pixel coordinates (centers at integers) and depth
  };
  std::vector<Projected> proj(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& p = mesh.vertices[i];
    proj[i] = {(dot(p, view.right) + kViewExtent) / view.pixel_size - 0.5,
               (dot(p, view.up) + kViewExtent) / view.pixel_size - 0.5, dot(p, view.forward) + kViewExtent};
  }
  const double last = resolution - 1;
  for (const auto& t : mesh.triangles) {
    const Projected& a = proj.at(t[0]);
    const Projected& b = proj.at(t[1]);
    const Projected& c = proj.at(t[2]);
    const double area = edge_function(a.x, a.y, b.x, b.y, c.x, c.y);
    if (area == 0.0 || !std::isfinite(area)) continue;  // seen edge-on
    const double sign = area > 0.0 ? 1.0 : -1.0;
    const int i0 = static_cast<int>(std::ceil(std::max(0.0, std::min({a.x, b.x, c.x}))));
    const int i1 = static_cast<int>(std::floor(std::min(last, std::max({a.x, b.x, c.x}))));
    const int j0 = static_cast<int>(std::ceil(std::max(0.0, std::min({a.y, b.y, c.y}))));
    const int j1 = static_cast<int>(std::floor(std::min(last, std::max({a.y, b.y, c.y}))));
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        const double w0 = sign * edge_function(b.x, b.y, c.x, c.y, i, j);
        const double w1 = sign * edge_function(c.x, c.y, a.x, a.y, i, j);
        const double w2 = sign * edge_function(a.x, a.y, b.x, b.y, i, j);
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        const double d = (w0 * a.d + w1 * b.d + w2 * c.d) / (w0 + w1 + w2);
        float& px = view.depth[static_cast<std::size_t>(j) * resolution + i];
        px = std::min(px, static_cast<float>(std::max(0.0, d)));
      }
    }
  }
  return view;
}

DepthView close_depth(const DepthView& view, int window) {
  if (window < 1 || window % 2 == 0) {
    throw std::invalid_argument("close_depth: window must be a positive odd integer, got " + std::to_string(window));
  }
  DepthView out = view;
  if (window == 1) return out;
  const int h = window / 2;
  const int n = view.resolution;
  auto lo = [](float a, float b) { return std::min(a, b); };
  auto hi = [](float a, float b) { return std::max(a, b); };
  std::vector<float> img = filter_pass(view.depth, n, h, true, lo);
  img = filter_pass(img, n, h, false, lo);
  img = filter_pass(img, n, h, true, hi);
  out.depth = filter_pass(img, n, h, false, hi);
  return out;
}

TsdfVolume fuse(const std::vector<DepthView>& views, int resolution, double truncation, std::size_t workers) {
  if (views.empty()) throw std::invalid_argument("fuse: no views");
  if (resolution < 2) throw std::invalid_argument("fuse: resolution must be >= 2");
  TsdfVolume vol;
  const auto n = static_cast<std::uint32_t>(resolution);
  vol.resolution = {n, n, n};
  vol.voxel_size = 2.0 * kViewExtent / resolution;
  vol.origin = {-kViewExtent, -kViewExtent, -kViewExtent};
  vol.truncation = truncation > 0.0 ? truncation : 3.0 * vol.voxel_size;
  const double delta = vol.truncation;
  const double bias = 0.5 * vol.voxel_size;
  vol.values.assign(vol.voxel_count(), static_cast<float>(delta));
  vol.weights.assign(vol.voxel_count(), 0.0f);

  // Slabs of constant z; each voxel accumulates views in list order, so the
  // result does not depend on the worker count.
  parallel_for(
      n, 1,
      [&](std::size_t k0, std::size_t k1) {
        std::vector<double> sum(std::size_t{n} * n);
        std::vector<std::uint32_t> seen(sum.size());
        std::vector<std::uint32_t> covered(sum.size());
        for (std::size_t k = k0; k < k1; ++k) {
          std::fill(sum.begin(), sum.end(), 0.0);
          std::fill(seen.begin(), seen.end(), 0u);
          std::fill(covered.begin(), covered.end(), 0u);
          for (const DepthView& v : views) {
            const int r = v.resolution;
            for (std::uint32_t j = 0; j < n; ++j) {
              for (std::uint32_t i = 0; i < n; ++i) {
                const Vec3 p = vol.voxel_center(i, j, k);
                const double px = std::floor((dot(p, v.right) + kViewExtent) / v.pixel_size);
                const double py = std::floor((dot(p, v.up) + kViewExtent) / v.pixel_size);
                if (px < 0.0 || py < 0.0 || px >= r || py >= r) continue;
                const std::size_t idx = std::size_t{j} * n + i;
                ++covered[idx];
                const float d = v.depth[static_cast<std::size_t>(py) * r + static_cast<std::size_t>(px)];
                if (d == kNoHit) {
                  sum[idx] += delta;
                  ++seen[idx];
                  continue;
                }
                const double sdf = static_cast<double>(d) - (dot(p, v.forward) + kViewExtent);
                if (sdf < -delta) continue;
                sum[idx] += std::clamp(sdf - bias, -delta, delta);
                ++seen[idx];
              }
            }
          }
          for (std::size_t idx = 0; idx < sum.size(); ++idx) {
            const std::size_t out = k * sum.size() + idx;
            if (covered[idx] == 0) continue;
            vol.weights[out] = static_cast<float>(covered[idx]);
            vol.values[out] = static_cast<float>(seen[idx] == 0 ? -delta : sum[idx] / seen[idx]);
          }
        }
      },
      workers);
  return vol;
}

void WatertightConfig::validate() const {
  if (views < 4) throw std::invalid_argument("watertight: need at least 4 views");
  if (depth_resolution < 64) throw std::invalid_argument("watertight: depth resolution must be >= 64");
  if (volume_resolution < 32 || (volume_resolution & (volume_resolution - 1)) != 0) {
    throw std::invalid_argument("watertight: volume resolution must be a power of two >= 32");
  }
  if (window < 1 || window % 2 == 0) throw std::invalid_argument("watertight: window must be a positive odd integer");
  if (!(truncation_voxels > 0.0) || !std::isfinite(truncation_voxels)) {
    throw std::invalid_argument("watertight: truncation must be positive");
  }
}

TriangleMesh make_watertight(const TriangleMesh& mesh, const WatertightConfig& cfg, TsdfVolume* volume) {
  cfg.validate();
  validate(mesh);
  if (mesh.triangles.empty()) throw std::invalid_argument("watertight: mesh has no triangles");
  for (const auto& t : mesh.triangles) {
    for (auto v : t) {
      if (norm(mesh.vertices[v]) > 1.0 + 1e-6) {
        throw std::invalid_argument("watertight: mesh must lie in the unit ball; normalize it first");
      }
    }
  }
  const std::vector<Vec3> dirs = view_directions(cfg.views);
  std::vector<DepthView> views(dirs.size());
  parallel_for(
      dirs.size(), 1,
      [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
          views[i] = close_depth(render_depth(mesh, dirs[i], cfg.depth_resolution), cfg.window);
        }
      },
      cfg.workers);
  const double voxel = 2.0 * kViewExtent / cfg.volume_resolution;
  TsdfVolume vol = fuse(views, cfg.volume_resolution, cfg.truncation_voxels * voxel, cfg.workers);

  // Lattice vertices sit on voxel centers; the last layer lies beyond the
  // volume and reads +truncation, which closes the surface.
  const auto field = grid_field_from_volume(vol);
  const Vec3 lo = vol.voxel_center(0, 0, 0);
  const double span = 2.0 * kViewExtent;
  const Box bounds{lo, lo + Vec3{span, span, span}};
  ExtractionResult res = extract_dense(*field, cfg.volume_resolution, bounds, cfg.workers);
  if (res.mesh.triangles.empty()) throw std::runtime_error("watertight: fused volume has no surface");
  if (volume != nullptr) *volume = std::move(vol);
  return std::move(res.mesh);
}

}  // namespace meshforge
