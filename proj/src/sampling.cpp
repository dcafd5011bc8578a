#include "meshforge/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <memory>
#include <random>
#include <stdexcept>
#include <tuple>

#include "meshforge/isosurface.hpp"
#include "meshforge/parallel.hpp"

namespace meshforge {

namespace {

constexpr std::size_t kChunk = 1 << 14;

// Independent stream per (seed, group, chunk), so output does not depend on
// how chunks are spread over workers.
std::mt19937_64 chunk_rng(std::uint64_t seed, SampleGroup group, std::size_t chunk) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(group), static_cast<std::uint32_t>(chunk),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(chunk) >> 32)};
  return std::mt19937_64(seq);
}

template <typename Body>
void for_each_chunk(std::size_t n, std::size_t workers, Body&& body) {
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  parallel_for(
      chunks, 1,
      [&](std::size_t c0, std::size_t c1) {
        for (std::size_t c = c0; c < c1; ++c) body(c, c * kChunk, std::min(n, (c + 1) * kChunk));
      },
      workers);
}

double corner_angle(const Vec3& at, const Vec3& b, const Vec3& c) {
  const Vec3 u = b - at;
  const Vec3 v = c - at;
  const double s = norm(cross(u, v));
  const double d = dot(u, v);
  if (s == 0.0 && d == 0.0) return 0.0;
  return std::atan2(s, d);
}

// 2D edge function with endpoints in canonical order, plus a symbolic
// perturbation of the query point by (e, e^2) to break exact ties. Adjacent
// triangles therefore disagree on every shared edge, which makes the parity
// count exact on closed meshes.
int edge_sign(double ax, double ay, double bx, double by, double px, double py) {
  double s = 1.0;
  if (std::tie(ax, ay) > std::tie(bx, by)) {
    std::swap(ax, bx);
    std::swap(ay, by);
    s = -1.0;
  }
  double w = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
  if (w == 0.0) w = -(by - ay);
  if (w == 0.0) w = bx - ax;
  w *= s;
  return w > 0.0 ? 1 : (w < 0.0 ? -1 : 0);
}

// Triangles binned by their projection along one axis, for parity rays.
class AxisRayCaster {
 public:
  AxisRayCaster(const TriangleMesh& mesh, int axis) : mesh_(mesh), axis_(axis) {
    u_ = (axis + 1) % 3;
    v_ = (axis + 2) % 3;
    const Box box = bounding_box(mesh);
    lo_u_ = box.lo[u_];
    lo_v_ = box.lo[v_];
    const double ext = std::max({box.hi[u_] - lo_u_, box.hi[v_] - lo_v_, 1e-12});
    grid_ = std::clamp(static_cast<int>(std::sqrt(static_cast<double>(mesh.triangles.size()))), 8, 1024);
    cell_ = ext / grid_ * (1.0 + 1e-9);
    bins_.resize(static_cast<std::size_t>(grid_) * grid_);
    for (std::uint32_t t = 0; t < mesh.triangles.size(); ++t) {
      double u0 = 1e300, u1 = -1e300, v0 = 1e300, v1 = -1e300;
      for (auto vi : mesh.triangles[t]) {
        const Vec3& p = mesh.vertices[vi];
        u0 = std::min(u0, p[u_]);
        u1 = std::max(u1, p[u_]);
        v0 = std::min(v0, p[v_]);
        v1 = std::max(v1, p[v_]);
      }
      for (int j = bin(v0, lo_v_); j <= bin(v1, lo_v_); ++j) {
        for (int i = bin(u0, lo_u_); i <= bin(u1, lo_u_); ++i) {
          bins_[static_cast<std::size_t>(j) * grid_ + i].push_back(t);
        }
      }
    }
  }

  // Number of triangles crossed by the ray from p along +axis.
  std::size_t crossings(const Vec3& p) const {
    const double pu = p[u_];
    const double pv = p[v_];
    const double iu = (pu - lo_u_) / cell_;
    const double iv = (pv - lo_v_) / cell_;
    if (iu < 0.0 || iv < 0.0 || iu >= grid_ || iv >= grid_) return 0;
    std::size_t count = 0;
    for (auto t : bins_[static_cast<std::size_t>(iv) * grid_ + static_cast<std::size_t>(iu)]) {
      const auto& tri = mesh_.triangles[t];
      const Vec3& a = mesh_.vertices[tri[0]];
      const Vec3& b = mesh_.vertices[tri[1]];
      const Vec3& c = mesh_.vertices[tri[2]];
      const int s0 = edge_sign(b[u_], b[v_], c[u_], c[v_], pu, pv);
      const int s1 = edge_sign(c[u_], c[v_], a[u_], a[v_], pu, pv);
      const int s2 = edge_sign(a[u_], a[v_], b[u_], b[v_], pu, pv);
      if (s0 != s1 || s1 != s2 || s0 == 0) continue;
      // Height of the triangle's plane above p along the axis.
      const Vec3 n = cross(b - a, c - a);
      if (n[axis_] == 0.0) continue;
      const double h = a[axis_] - (n[u_] * (pu - a[u_]) + n[v_] * (pv - a[v_])) / n[axis_];
      if (h > p[axis_]) ++count;
    }
    return count;
  }

 private:
  int bin(double x, double lo) const { return std::clamp(static_cast<int>((x - lo) / cell_), 0, grid_ - 1); }

  const TriangleMesh& mesh_;
  int axis_;
  int u_ = 0;
  int v_ = 0;
  double lo_u_ = 0.0;
  double lo_v_ = 0.0;
  double cell_ = 1.0;
  int grid_ = 1;
  std::vector<std::vector<std::uint32_t>> bins_;
};

class ParityOracle {
 public:
  explicit ParityOracle(const TriangleMesh& mesh) : x_(mesh, 0), y_(mesh, 1), z_(mesh, 2) {}
  bool inside(const Vec3& p) const {
    const int votes = static_cast<int>(x_.crossings(p) % 2) + static_cast<int>(y_.crossings(p) % 2) +
                      static_cast<int>(z_.crossings(p) % 2);
    return votes >= 2;
  }

 private:
  AxisRayCaster x_, y_, z_;
};

Vec3 random_in_triangle(const TriangleMesh& m, const Triangle& t, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r1 = std::sqrt(u(rng));
  const double r2 = u(rng);
  const Vec3& a = m.vertices[t[0]];
  const Vec3& b = m.vertices[t[1]];
  const Vec3& c = m.vertices[t[2]];
  return a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2);
}

// Draws surface points by triangle weight; fills points, normals and
// source triangles of `out` in [begin, end).
void draw_surface(const TriangleMesh& mesh, const std::vector<double>& cdf, std::mt19937_64& rng,
                  std::size_t begin, std::size_t end, PointSampleSet& out) {
  std::uniform_real_distribution<double> u(0.0, cdf.back());
  for (std::size_t i = begin; i < end; ++i) {
    const double x = u(rng);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), x);
    if (it == cdf.end()) it = std::lower_bound(cdf.begin(), cdf.end(), cdf.back());
    const auto t = static_cast<std::size_t>(it - cdf.begin());
    const Triangle& tri = mesh.triangles[t];
    out.data.points[i] = random_in_triangle(mesh, tri, rng);
    out.data.normals[i] = triangle_normal(mesh, tri);
    out.source_triangle[i] = static_cast<std::uint32_t>(t);
  }
}

std::vector<double> cumulative(const std::vector<double>& w) {
  std::vector<double> cdf(w.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(w[i] >= 0.0) || !std::isfinite(w[i])) throw std::invalid_argument("sampling: invalid triangle weight");
    acc += w[i];
    cdf[i] = acc;
  }
  if (!(acc > 0.0)) throw std::invalid_argument("sampling: all triangle weights are zero");
  return cdf;
}

void check_mesh(const TriangleMesh& mesh) {
  validate(mesh);
  if (mesh.triangles.empty()) throw std::invalid_argument("sampling: mesh has no triangles");
}

}  // namespace

const char* group_name(SampleGroup group) {
  switch (group) {
    case SampleGroup::kSpace:
      return "SPACE";
    case SampleGroup::kSurface:
      return "SURFACE";
    case SampleGroup::kNearSurface:
      return "NEAR_SURFACE";
  }
  return "?";
}

CurvatureWeights compute_curvature(const TriangleMesh& mesh) {
  validate(mesh);
  CurvatureWeights w;
  w.vertex_defect.assign(mesh.vertices.size(), 2.0 * kPi);
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      w.vertex_defect[t[k]] -= corner_angle(mesh.vertices[t[k]], mesh.vertices[t[(k + 1) % 3]],
                                            mesh.vertices[t[(k + 2) % 3]]);
    }
  }
  w.triangle_weight.reserve(mesh.triangles.size());
  for (const auto& t : mesh.triangles) {
    double mean = 0.0;
    for (auto v : t) mean += std::clamp(std::abs(w.vertex_defect[v]), kMinDefectWeight, kPi);
    w.triangle_weight.push_back(triangle_area(mesh, t) * mean / 3.0);
  }
  return w;
}

bool inside_by_parity(const TriangleMesh& mesh, const Vec3& p) { return ParityOracle(mesh).inside(p); }

PointSampleSet sample_space(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed, std::size_t workers) {
  if (n == 0) throw std::invalid_argument("sample_space: n must be >= 1");
  validate(mesh);
  PointSampleSet out;
  out.group = SampleGroup::kSpace;
  out.seed = seed;
  out.labeled = !mesh.triangles.empty() && verify_watertight(mesh).is_closed;
  out.data.points.resize(n);
  if (out.labeled) out.data.labels.resize(n);
  std::unique_ptr<ParityOracle> oracle;
  if (out.labeled) oracle = std::make_unique<ParityOracle>(mesh);
  for_each_chunk(n, workers, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    std::mt19937_64 rng = chunk_rng(seed, out.group, chunk);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::size_t i = begin; i < end; ++i) {
      const double x = u(rng);
      const double y = u(rng);
      const double z = u(rng);
      out.data.points[i] = {x, y, z};
      if (oracle) out.data.labels[i] = oracle->inside(out.data.points[i]) ? 1 : 0;
    }
  });
  return out;
}

PointSampleSet sample_surface(const TriangleMesh& mesh, const CurvatureWeights& weights, std::size_t n,
                              std::uint64_t seed, std::size_t workers) {
  if (n == 0) throw std::invalid_argument("sample_surface: n must be >= 1");
  check_mesh(mesh);
  if (weights.triangle_weight.size() != mesh.triangles.size()) {
    throw std::invalid_argument("sample_surface: weights do not match the mesh");
  }
  const std::vector<double> cdf = cumulative(weights.triangle_weight);
  PointSampleSet out;
  out.group = SampleGroup::kSurface;
  out.seed = seed;
  out.data.points.resize(n);
  out.data.normals.resize(n);
  out.source_triangle.resize(n);
  for_each_chunk(n, workers, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    std::mt19937_64 rng = chunk_rng(seed, out.group, chunk);
    draw_surface(mesh, cdf, rng, begin, end, out);
  });
  return out;
}

PointSampleSet sample_near_surface(const TriangleMesh& mesh, std::size_t n, double bias, std::uint64_t seed,
                                   std::size_t workers) {
  if (n == 0) throw std::invalid_argument("sample_near_surface: n must be >= 1");
  if (!(bias > 0.0) || !std::isfinite(bias)) throw std::invalid_argument("sample_near_surface: bias must be > 0");
  check_mesh(mesh);
  std::vector<double> area(mesh.triangles.size());
  for (std::size_t t = 0; t < area.size(); ++t) area[t] = triangle_area(mesh, mesh.triangles[t]);
  const std::vector<double> cdf = cumulative(area);
  PointSampleSet out;
  out.group = SampleGroup::kNearSurface;
  out.seed = seed;
  out.bias = bias;
  out.data.points.resize(n);
  out.data.normals.resize(n);
  out.data.displacements.resize(n);
  out.source_triangle.resize(n);
  const double limit2 = 9.0 * bias * bias;
  for_each_chunk(n, workers, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    std::mt19937_64 rng = chunk_rng(seed, out.group, chunk);
    draw_surface(mesh, cdf, rng, begin, end, out);
    std::normal_distribution<double> g(0.0, bias);
    for (std::size_t i = begin; i < end; ++i) {
      Vec3 d;
      do {
        d = {g(rng), g(rng), g(rng)};
      } while (squared_norm(d) > limit2);
      out.data.displacements[i] = d;
      out.data.points[i] += d;
    }
  });
  return out;
}

std::string sample_sidecar_json(const PointSampleSet& set, const CurvatureWeights* weights) {
  nlohmann::json j;
  j["group"] = group_name(set.group);
  j["n"] = set.data.points.size();
  j["seed"] = set.seed;
  j["bias"] = set.bias;
  j["labeled"] = set.labeled;
  if (set.labeled && !set.data.labels.empty()) {
    std::size_t inside = 0;
    for (auto l : set.data.labels) inside += l;
    j["inside_fraction"] = static_cast<double>(inside) / static_cast<double>(set.data.labels.size());
  }
  if (weights != nullptr && !weights->triangle_weight.empty()) {
    const auto& w = weights->triangle_weight;
    double total = 0.0;
    for (double x : w) total += x;
    double defect = 0.0;
    for (double d : weights->vertex_defect) defect += d;
    j["weights"] = {{"min", *std::min_element(w.begin(), w.end())},
                    {"max", *std::max_element(w.begin(), w.end())},
                    {"mean", total / static_cast<double>(w.size())},
                    {"total_defect", defect}};
  }
  return j.dump(2);
}

}  // namespace meshforge
