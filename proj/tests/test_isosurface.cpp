#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <json.hpp>
#include <random>
#include <tuple>

#include "meshforge/field.hpp"
#include "meshforge/isosurface.hpp"

using namespace meshforge;

namespace {

using Soup = std::vector<std::array<Vec3, 3>>;

bool less(const Vec3& a, const Vec3& b) { return std::tie(a.x, a.y, a.z) < std::tie(b.x, b.y, b.z); }

// Triangles as positions, each rotated to start at its smallest vertex, sorted.
Soup canonical(const TriangleMesh& m) {
  Soup out;
  for (const auto& t : m.triangles) {
    std::array<Vec3, 3> a{m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]};
    int k = 0;
    for (int i = 1; i < 3; ++i) {
      if (less(a[i], a[k])) k = i;
    }
    std::rotate(a.begin(), a.begin() + k, a.end());
    out.push_back(a);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    for (int i = 0; i < 3; ++i) {
      if (less(a[i], b[i])) return true;
      if (less(b[i], a[i])) return false;
    }
    return false;
  });
  return out;
}

struct Named {
  const char* name;
  FieldPtr field;
  std::int64_t euler;
};

std::vector<Named> analytic_fields() {
  return {{"sphere", sphere_field({0, 0, 0}, 0.8), 2},
          {"offset sphere", sphere_field({0.13, -0.07, 0.21}, 0.55), 2},
          {"torus", torus_field(0.6, 0.25), 0},
          {"union", csg_union(sphere_field({-0.3, 0, 0}, 0.5), sphere_field({0.35, 0.1, 0}, 0.45)), 2},
          {"intersection", csg_intersection(sphere_field({-0.2, 0, 0}, 0.6), sphere_field({0.2, 0, 0}, 0.6)), 2}};
}

ExtractionConfig config(int d, int d0 = 0, Refinement r = Refinement::kSurfaceTracking) {
  ExtractionConfig c;
  c.final_resolution = d;
  c.coarse_resolution = d0 == 0 ? std::min(32, d / 4) : d0;
  c.refinement = r;
  return c;
}

// Brute force: cell (i,j,k) of an n-grid is active when its corners change
// sign or the smallest |corner| is within margin * diagonal.
std::size_t brute_force_active(const ScalarField& f, int n, double margin) {
  const double h = 2.0 / n;
  std::vector<double> v(static_cast<std::size_t>(n + 1) * (n + 1) * (n + 1));
  auto at = [&](int i, int j, int k) -> double& { return v[(static_cast<std::size_t>(i) * (n + 1) + j) * (n + 1) + k]; };
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      for (int k = 0; k <= n; ++k) at(i, j, k) = evaluate_at(f, {-1 + i * h, -1 + j * h, -1 + k * h});
    }
  }
  std::size_t count = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        bool pos = false, neg = false;
        double m = 1e300;
        for (int c = 0; c < 8; ++c) {
          const double x = at(i + (c & 1), j + ((c >> 1) & 1), k + (c >> 2));
          (x >= 0 ? pos : neg) = true;
          m = std::min(m, std::abs(x));
        }
        if ((pos && neg) || m <= margin * h * std::sqrt(3.0)) ++count;
      }
    }
  }
  return count;
}

class ConstantField final : public ScalarField {
 public:
  explicit ConstantField(double v) : v_(v) {}
  void evaluate(std::span<const Vec3>, std::span<double> out) const override {
    std::fill(out.begin(), out.end(), v_);
  }

 private:
  double v_;
};

}  // namespace

TEST_CASE("config validation") {
  CHECK_NOTHROW(config(64, 16).validate());
  CHECK_THROWS_AS(config(96, 16).validate(), std::invalid_argument);
  CHECK_THROWS_AS(config(16, 4).validate(), std::invalid_argument);
  CHECK_THROWS_AS(config(64, 32).validate(), std::invalid_argument);
  CHECK_THROWS_AS(config(64, 12).validate(), std::invalid_argument);
  ExtractionConfig c = config(64, 16);
  c.activity_margin = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = config(64, 16);
  c.expansion_radius = -1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK_THROWS_AS(extract(*sphere_field({0, 0, 0}, 0.5), config(100, 25)), std::invalid_argument);
}

TEST_CASE("march_cell basic cases") {
  std::array<double, 8> v;
  v.fill(-1.0);
  CHECK(march_cell(v, {0, 0, 0}, 1.0).empty());
  v.fill(1.0);
  CHECK(march_cell(v, {0, 0, 0}, 1.0).empty());

  for (int corner = 0; corner < 8; ++corner) {
    v.fill(1.0);
    v[corner] = -1.0;
    const auto tris = march_cell(v, {0, 0, 0}, 2.0);
    REQUIRE(tris.size() == 1);
    // Vertices sit at edge midpoints adjacent to the corner.
    static const int off[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
    const Vec3 c{2.0 * off[corner][0], 2.0 * off[corner][1], 2.0 * off[corner][2]};
    for (const auto& p : tris[0]) CHECK(distance(p, c) == doctest::Approx(1.0));
    // Outward: the normal points away from the negative corner.
    const Vec3 n = cross(tris[0][1] - tris[0][0], tris[0][2] - tris[0][0]);
    CHECK(dot(n, tris[0][0] - c) > 0.0);
  }

  v = {-1, 3, 3, 3, 3, 3, 3, 3};
  const auto t = march_cell(v, {1, 2, 3}, 0.5);
  REQUIRE(t.size() == 1);
  for (const auto& p : t[0]) CHECK(distance(p, Vec3{1, 2, 3}) == doctest::Approx(0.125));

  // Exact zeros do not produce degenerate triangles.
  v = {0, 1, 1, 1, 1, 1, 1, 1};
  for (const auto& tri : march_cell(v, {0, 0, 0}, 1.0)) {
    CHECK(norm(cross(tri[1] - tri[0], tri[2] - tri[0])) >= 0.0);
  }
}

TEST_CASE("ambiguous faces are consistent between neighbours") {
  // Alternating signs on the shared face x = 1 of two cells.
  std::vector<float> vals(3 * 2 * 2);
  auto at = [&](int i, int j, int k) -> float& { return vals[(k * 2 + j) * 3 + i]; };
  for (int k = 0; k < 2; ++k) {
    for (int j = 0; j < 2; ++j) {
      for (int i = 0; i < 3; ++i) at(i, j, k) = 1.0f;
    }
  }
  at(1, 0, 0) = -1.0f;
  at(1, 1, 1) = -0.5f;
  const GridField g({3, 2, 2}, {0, 0, 0}, 1.0, vals, 1.0);
  const auto r = extract_dense(g, 32, Box{{0, 0, 0}, {2, 1, 1}});
  CHECK_FALSE(r.mesh.triangles.empty());

  // Random fields on small grids, positive border: every output must close.
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  int failures = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    const int n = 5;
    std::vector<float> v(n * n * n);
    for (int k = 0; k < n; ++k) {
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
          const bool border = i == 0 || j == 0 || k == 0 || i == n - 1 || j == n - 1 || k == n - 1;
          v[(k * n + j) * n + i] = border ? 1.0f : static_cast<float>(u(rng));
        }
      }
    }
    // Lattice at resolution 4 hits the grid samples exactly.
    const GridField field({5, 5, 5}, {-1, -1, -1}, 0.5, v, 1.0);
    ExtractionResult res = extract_dense(field, 4);
    const WatertightReport w = verify_watertight(res.mesh);
    if (!(w.is_closed && w.is_manifold)) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("verify_watertight examples") {
  TriangleMesh tri;
  tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  tri.triangles = {{0, 1, 2}};
  WatertightReport w = verify_watertight(tri);
  CHECK(w.boundary_edge_count == 3);
  CHECK_FALSE(w.is_closed);

  TriangleMesh tet;
  tet.vertices = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  tet.triangles = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
  w = verify_watertight(tet);
  CHECK(w.is_closed);
  CHECK(w.is_manifold);
  CHECK(w.euler_characteristic == 2);
  CHECK(signed_volume(tet) > 0);

  TriangleMesh flipped = tet;
  std::swap(flipped.triangles[0][1], flipped.triangles[0][2]);
  w = verify_watertight(flipped);
  CHECK(w.inconsistent_edge_count == 3);
  CHECK_FALSE(w.is_closed);

  // Two tetrahedra sharing one vertex: closed edges, non-manifold vertex.
  TriangleMesh bow = tet;
  for (const auto& p : tet.vertices) bow.vertices.push_back(p * -1.0 + Vec3{2, 2, 2});
  for (const auto& t : tet.triangles) bow.triangles.push_back({t[0] + 4, t[1] + 4, t[2] + 4});
  for (auto& t : bow.triangles) {
    for (auto& i : t) {
      if (i == 4) i = 0;
    }
  }
  w = verify_watertight(bow);
  CHECK(w.non_manifold_vertex_count == 1);
  CHECK_FALSE(w.is_manifold);

  const auto sphere = extract(*sphere_field({0, 0, 0}, 0.8), config(128));
  w = verify_watertight(sphere.mesh);
  CHECK(w.is_closed);
  CHECK(w.non_manifold_edge_count == 0);
}

TEST_CASE("expand_active examples") {
  ActiveCellSet s;
  s.resolution = 8;
  s.cells = {{3, 3, 3}};
  CHECK(expand_active(s, 0).cells == s.cells);
  CHECK(expand_active(s, 1).cells.size() == 27);
  CHECK(expand_active(s, 2).cells.size() == 125);
  s.cells = {{0, 0, 0}};
  CHECK(expand_active(s, 1).cells.size() == 8);
  s.cells = {{0, 3, 7}};
  CHECK(expand_active(s, 1).cells.size() == 12);
  // Oracle: enumerate the block and clip.
  s.cells = {{0, 0, 0}, {7, 7, 7}, {4, 0, 5}};
  std::size_t expected = 0;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      for (int k = 0; k < 8; ++k) {
        bool hit = false;
        for (const auto& c : s.cells) hit |= std::abs(c[0] - i) <= 1 && std::abs(c[1] - j) <= 1 && std::abs(c[2] - k) <= 1;
        expected += hit;
      }
    }
  }
  CHECK(expand_active(s, 1).cells.size() == expected);
  ActiveCellSet bad;
  bad.resolution = 4;
  bad.cells = {{4, 0, 0}};
  CHECK_THROWS_AS(bad.normalize(), std::out_of_range);
}

TEST_CASE("subdivide_active examples") {
  const ConstantField far(10.0);
  ActiveCellSet coarse;
  coarse.resolution = 32;
  coarse.cells = {{5, 5, 5}, {0, 0, 0}};
  std::uint64_t q = 0;
  CHECK(subdivide_active(coarse, far, 1.0, Box::cube(1.0), &q).cells.empty());
  CHECK(q == 16);  // two cells, shared corners fetched once

  // A plane through the middle of the cell changes sign.
  const auto s = sphere_field({-10.0 - 1.0 / 32, 0, 0}, 10.0);
  coarse.cells = {{15, 15, 15}};
  const ActiveCellSet fine = subdivide_active(coarse, *s, 1e-9);
  CHECK(fine.resolution == 64);
  CHECK(fine.cells.size() == 8);
  CHECK(fine.contains({30, 30, 30}));
  CHECK(fine.contains({31, 31, 31}));

  const auto sphere = sphere_field({0, 0, 0}, 0.8);
  const std::size_t a = brute_force_active(*sphere, 32, 1.0);
  ActiveCellSet at32;
  at32.resolution = 32;
  // Active cells at 32 by brute force, then their children at 64.
  const double h = 2.0 / 32;
  for (int i = 0; i < 32; ++i) {
    for (int j = 0; j < 32; ++j) {
      for (int k = 0; k < 32; ++k) {
        bool pos = false, neg = false;
        double m = 1e300;
        for (int c = 0; c < 8; ++c) {
          const double x = evaluate_at(*sphere, {-1 + (i + (c & 1)) * h, -1 + (j + ((c >> 1) & 1)) * h, -1 + (k + (c >> 2)) * h});
          (x >= 0 ? pos : neg) = true;
          m = std::min(m, std::abs(x));
        }
        if ((pos && neg) || m <= h * std::sqrt(3.0)) at32.cells.push_back({i, j, k});
      }
    }
  }
  REQUIRE(at32.cells.size() == a);
  const ActiveCellSet children = subdivide_active(at32, *sphere, 1.0);
  CHECK(children.cells.size() == 8 * a);
  // Active cells of the 64 grid, restricted to that refinement.
  std::size_t active64 = 0;
  const double h64 = 2.0 / 64;
  for (const auto& c : children.cells) {
    bool pos = false, neg = false;
    double m = 1e300;
    for (int k = 0; k < 8; ++k) {
      const double x = evaluate_at(*sphere, {-1 + (c[0] + (k & 1)) * h64, -1 + (c[1] + ((k >> 1) & 1)) * h64, -1 + (c[2] + (k >> 2)) * h64});
      (x >= 0 ? pos : neg) = true;
      m = std::min(m, std::abs(x));
    }
    active64 += (pos && neg) || m <= h64 * std::sqrt(3.0);
  }
  CHECK(active64 == brute_force_active(*sphere, 64, 1.0));
  CHECK(active64 >= a);
  CHECK(active64 <= 4 * a);
}

TEST_CASE("sparse extraction equals dense marching cubes") {
  for (const auto& f : analytic_fields()) {
    for (int d : {32, 64}) {
      const TriangleMesh dense = extract_dense(*f.field, d).mesh;
      const Soup ref = canonical(dense);
      for (int d0 : {4, 8, 16}) {
        if (d0 > d / 4) continue;
        for (Refinement r : {Refinement::kSurfaceTracking, Refinement::kBand}) {
          CAPTURE(f.name);
          CAPTURE(d);
          CAPTURE(d0);
          const ExtractionResult s = extract(*f.field, config(d, d0, r));
          CHECK(canonical(s.mesh) == ref);
          CHECK(s.mesh.vertices.size() == dense.vertices.size());
          CHECK(s.stats.queries_total <= s.stats.dense_equivalent);
        }
      }
    }
  }
}

TEST_CASE("watertight output for analytic fields") {
  for (const auto& f : analytic_fields()) {
    for (int d : {64, 128, 256}) {
      CAPTURE(f.name);
      CAPTURE(d);
      const ExtractionResult r = extract(*f.field, config(d));
      const WatertightReport w = verify_watertight(r.mesh);
      CHECK(w.is_closed);
      CHECK(w.is_manifold);
      CHECK(w.euler_characteristic == f.euler);
      CHECK(signed_volume(r.mesh) > 0.0);
      // Vertices lie within one cell diagonal of the zero set.
      const double diag = 2.0 / d * std::sqrt(3.0);
      std::vector<double> vals(r.mesh.vertices.size());
      f.field->evaluate(r.mesh.vertices, vals);
      double worst = 0.0;
      for (double v : vals) worst = std::max(worst, std::abs(v));
      CHECK(worst <= diag);
    }
  }
}

TEST_CASE("sphere and torus at 256") {
  const auto sphere = extract(*sphere_field({0, 0, 0}, 0.8), config(256));
  WatertightReport w = verify_watertight(sphere.mesh);
  CHECK(w.is_closed);
  CHECK(w.euler_characteristic == 2);
  const double volume = 4.0 / 3.0 * kPi * 0.512;
  CHECK(volume == doctest::Approx(2.1447).epsilon(1e-4));
  CHECK(std::abs(signed_volume(sphere.mesh) - volume) <= 0.01 * volume);

  const auto torus = extract(*torus_field(0.6, 0.25), config(256));
  w = verify_watertight(torus.mesh);
  CHECK(w.is_closed);
  CHECK(w.euler_characteristic == 0);
  const double torus_volume = 2 * kPi * kPi * 0.6 * 0.25 * 0.25;
  CHECK(std::abs(signed_volume(torus.mesh) - torus_volume) <= 0.01 * torus_volume);
}

TEST_CASE("query savings") {
  const auto f = sphere_field({0, 0, 0}, 0.8);
  std::uint64_t prev = 0;
  for (int d : {64, 128, 256, 512}) {
    const ExtractionResult r = extract(*f, config(d));
    CHECK(r.stats.dense_equivalent == static_cast<std::uint64_t>(d + 1) * (d + 1) * (d + 1));
    CHECK(r.stats.queries_total <= r.stats.dense_equivalent);
    if (prev != 0) CHECK(static_cast<double>(r.stats.queries_total) / prev <= 5.0);
    prev = r.stats.queries_total;
    if (d == 512) CHECK(r.stats.queries_total * 100 <= r.stats.dense_equivalent);
  }
}

TEST_CASE("stats report and empty surfaces") {
  const auto r = extract(*sphere_field({0, 0, 0}, 0.8), config(64, 16));
  const auto j = nlohmann::json::parse(stats_to_json(r.stats));
  CHECK(j.at("queries_total").get<std::uint64_t>() == r.stats.queries_total);
  CHECK(j.at("dense_equivalent").get<std::uint64_t>() == 65u * 65u * 65u);
  CHECK(j.at("per_level_active").size() == 3);
  CHECK(j.at("wall_time_s").get<double>() >= 0.0);
  CHECK_FALSE(j.contains("empty_surface"));

  for (double v : {1.0, -1.0}) {
    const ConstantField c(v);
    const auto e = extract(c, config(64, 16));
    CHECK(e.mesh.triangles.empty());
    CHECK(e.stats.empty_surface);
    CHECK_FALSE(e.stats.diagnostic.empty());
    CHECK(nlohmann::json::parse(stats_to_json(e.stats)).at("empty_surface") == true);
  }
}

TEST_CASE("extraction is deterministic across worker counts") {
  const auto f = torus_field(0.6, 0.25);
  ExtractionConfig a = config(128);
  a.workers = 1;
  ExtractionConfig b = config(128);
  b.workers = 4;
  CHECK(extract(*f, a).mesh == extract(*f, b).mesh);
}
