#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <random>

#include "meshforge/field.hpp"
#include "meshforge/isosurface.hpp"
#include "meshforge/sampling.hpp"
#include "support.hpp"

using namespace meshforge;

namespace {

TriangleMesh extracted(const ScalarField& f, int res) {
  ExtractionConfig ec;
  ec.final_resolution = res;
  ec.coarse_resolution = std::min(32, res / 4);
  return extract(f, ec).mesh;
}

// Rounded box of half extent b and rounding radius r.
class RoundedBox final : public ScalarField {
 public:
  RoundedBox(double b, double r) : b_(b), r_(r) {}
  void evaluate(std::span<const Vec3> pts, std::span<double> out) const override {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Vec3 q{std::abs(pts[i].x) - b_, std::abs(pts[i].y) - b_, std::abs(pts[i].z) - b_};
      const Vec3 pos{std::max(q.x, 0.0), std::max(q.y, 0.0), std::max(q.z, 0.0)};
      out[i] = norm(pos) + std::min(std::max({q.x, q.y, q.z}), 0.0) - r_;
    }
  }

 private:
  double b_, r_;
};

TriangleMesh two_triangles() {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {3, 0, 0}, {4, 0, 0}, {3, 1, 0}};
  m.triangles = {{0, 1, 2}, {3, 4, 5}};
  return m;
}

// Distance from p to triangle t (closest point by region tests).
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0 && d2 <= 0) return distance(p, a);
  const Vec3 bp = p - b;
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0 && d4 <= d3) return distance(p, b);
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return distance(p, a + ab * (d1 / (d1 - d3)));
  const Vec3 cp = p - c;
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0 && d5 <= d6) return distance(p, c);
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return distance(p, a + ac * (d2 / (d2 - d6)));
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return distance(p, b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6))));
  const double denom = 1.0 / (va + vb + vc);
  return distance(p, a + ab * (vb * denom) + ac * (vc * denom));
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST_CASE("space samples are uniform in the cube") {
  const TriangleMesh cube = testing::cube_mesh(-0.5, 0.5);
  const PointSampleSet s = sample_space(cube, 1000000, 7);
  REQUIRE(s.data.points.size() == 1000000);
  CHECK(s.labeled);
  for (int a = 0; a < 3; ++a) {
    double mean = 0.0, sq = 0.0;
    for (const auto& p : s.data.points) {
      REQUIRE(std::abs(p[a]) <= 1.0);
      mean += p[a];
      sq += p[a] * p[a];
    }
    mean /= 1e6;
    const double var = sq / 1e6 - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0 / 3.0) < 0.01);
  }
  // The cube occupies 1/8 of the sampling volume; labels are exact here.
  std::size_t inside = 0;
  for (std::size_t i = 0; i < s.data.points.size(); ++i) {
    const auto& p = s.data.points[i];
    const bool truth = std::abs(p.x) < 0.5 && std::abs(p.y) < 0.5 && std::abs(p.z) < 0.5;
    REQUIRE(static_cast<bool>(s.data.labels[i]) == truth);
    inside += s.data.labels[i];
  }
  CHECK(std::abs(inside / 1e6 - 0.125) < 0.002);
}

TEST_CASE("space inside fraction and label agreement on a sphere") {
  const auto field = sphere_field({0, 0, 0}, 0.8);
  const TriangleMesh mesh = extracted(*field, 128);
  const PointSampleSet s = sample_space(mesh, 200000, 3);
  REQUIRE(s.labeled);
  std::size_t inside = 0, disagree = 0;
  const double cell = 2.0 / 128 * std::sqrt(3.0);
  for (std::size_t i = 0; i < s.data.points.size(); ++i) {
    const double d = evaluate_at(*field, s.data.points[i]);
    inside += s.data.labels[i];
    if (static_cast<bool>(s.data.labels[i]) != (d < 0)) {
      ++disagree;
      CHECK(std::abs(d) <= cell);
    }
  }
  const double expected = 4.0 / 3.0 * kPi * 0.512 / 8.0;
  CHECK(std::abs(inside / 2e5 - expected) <= 0.01 * expected);
  CHECK(disagree <= 200);
}

TEST_CASE("space determinism and unlabeled open meshes") {
  const TriangleMesh cube = testing::cube_mesh(-0.5, 0.5);
  CHECK(sample_space(cube, 1, 42).data == sample_space(cube, 1, 42).data);
  CHECK_FALSE(sample_space(cube, 1, 42).data == sample_space(cube, 1, 43).data);
  TriangleMesh open = cube;
  open.triangles.pop_back();
  const PointSampleSet s = sample_space(open, 100, 1);
  CHECK_FALSE(s.labeled);
  CHECK(s.data.labels.empty());
  CHECK(s.data.points.size() == 100);
  CHECK_THROWS(sample_space(cube, 0, 1));
}

TEST_CASE("angle defects") {
  const CurvatureWeights cube = compute_curvature(testing::cube_mesh());
  for (double d : cube.vertex_defect) CHECK(d == doctest::Approx(kPi / 2));

  // 3x3 vertex planar grid: the center vertex is flat.
  TriangleMesh plane;
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i < 3; ++i) plane.vertices.push_back({static_cast<double>(i), static_cast<double>(j), 0});
  }
  for (std::uint32_t j = 0; j < 2; ++j) {
    for (std::uint32_t i = 0; i < 2; ++i) {
      const std::uint32_t v = j * 3 + i;
      plane.triangles.push_back({v, v + 1, v + 4});
      plane.triangles.push_back({v, v + 4, v + 3});
    }
  }
  CHECK(std::abs(compute_curvature(plane).vertex_defect[4]) < 1e-12);

  auto total = [](const CurvatureWeights& w) {
    double s = 0.0;
    for (double d : w.vertex_defect) s += d;
    return s;
  };
  CHECK(std::abs(total(compute_curvature(testing::icosphere(0.8, 3))) - 4 * kPi) < 1e-6);
  CHECK(std::abs(total(compute_curvature(extracted(*sphere_field({0.1, 0, 0}, 0.6), 64))) - 4 * kPi) < 1e-6);
  CHECK(std::abs(total(compute_curvature(extracted(*torus_field(0.6, 0.25), 64)))) < 1e-6);

  for (double w : cube.triangle_weight) CHECK(w > 0.0);
  const CurvatureWeights flat = compute_curvature(plane);
  for (double w : flat.triangle_weight) CHECK(w >= 0.5 * kMinDefectWeight - 1e-15);
}

TEST_CASE("surface hit ratios follow the weights") {
  const TriangleMesh m = two_triangles();
  CurvatureWeights w;
  w.vertex_defect.assign(6, 0.0);
  w.triangle_weight = {1.0, 1.0};
  PointSampleSet s = sample_surface(m, w, 100000, 9);
  double hits0 = static_cast<double>(std::count(s.source_triangle.begin(), s.source_triangle.end(), 0u));
  CHECK(hits0 / (1e5 - hits0) == doctest::Approx(1.0).epsilon(0.02));

  w.triangle_weight = {3.0, 1.0};
  s = sample_surface(m, w, 100000, 9);
  hits0 = static_cast<double>(std::count(s.source_triangle.begin(), s.source_triangle.end(), 0u));
  CHECK(hits0 / (1e5 - hits0) == doctest::Approx(3.0).epsilon(0.05));

  for (std::size_t i = 0; i < s.data.points.size(); ++i) {
    const auto& t = m.triangles[s.source_triangle[i]];
    REQUIRE(point_triangle_distance(s.data.points[i], m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]) < 1e-12);
    REQUIRE(s.data.normals[i] == Vec3{0, 0, 1});
  }

  w.triangle_weight = {0.0, 0.0};
  CHECK_THROWS(sample_surface(m, w, 10, 1));
}

TEST_CASE("surface samples lie on the cube") {
  const TriangleMesh cube = testing::cube_mesh(-0.5, 0.5);
  const PointSampleSet s = sample_surface(cube, compute_curvature(cube), 100000, 4);
  for (std::size_t i = 0; i < s.data.points.size(); ++i) {
    const auto& p = s.data.points[i];
    const double d = std::max({std::abs(p.x), std::abs(p.y), std::abs(p.z)});
    REQUIRE(std::abs(d - 0.5) <= 1e-7);
    REQUIRE(norm(s.data.normals[i]) == doctest::Approx(1.0).epsilon(1e-6));
    // Outward normal.
    REQUIRE(dot(s.data.normals[i], p) > 0.0);
  }
}

TEST_CASE("chi-square test of triangle hits") {
  const TriangleMesh mesh = testing::icosphere(0.7, 2);
  REQUIRE(mesh.triangles.size() <= 1000);
  CurvatureWeights w = compute_curvature(mesh);
  // Spread the weights so the test has something to detect.
  for (std::size_t t = 0; t < w.triangle_weight.size(); ++t) w.triangle_weight[t] *= 1.0 + (t % 5);
  const std::size_t n = 1000000;
  const PointSampleSet s = sample_surface(mesh, w, n, 2024);
  std::vector<double> hits(mesh.triangles.size(), 0.0);
  for (auto t : s.source_triangle) hits[t] += 1.0;
  double total = 0.0;
  for (double x : w.triangle_weight) total += x;
  double chi2 = 0.0;
  for (std::size_t t = 0; t < hits.size(); ++t) {
    const double expected = n * w.triangle_weight[t] / total;
    chi2 += (hits[t] - expected) * (hits[t] - expected) / expected;
  }
  const boost::math::chi_squared dist(static_cast<double>(hits.size() - 1));
  const double p = boost::math::cdf(boost::math::complement(dist, chi2));
  CHECK(p > 0.01);
}

TEST_CASE("curvature concentrates samples on a rounded cube") {
  const RoundedBox box(0.45, 0.2);
  const TriangleMesh mesh = extracted(box, 64);
  const CurvatureWeights w = compute_curvature(mesh);
  const PointSampleSet s = sample_surface(mesh, w, 400000, 5);
  std::vector<double> hits(mesh.triangles.size(), 0.0);
  for (auto t : s.source_triangle) hits[t] += 1.0;
  double area_hi = 0, area_lo = 0, w_hi = 0, w_lo = 0, h_hi = 0, h_lo = 0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const double a = triangle_area(mesh, mesh.triangles[t]);
    const bool high = w.triangle_weight[t] > 10.0 * kMinDefectWeight * a;
    (high ? area_hi : area_lo) += a;
    (high ? w_hi : w_lo) += w.triangle_weight[t];
    (high ? h_hi : h_lo) += hits[t];
  }
  REQUIRE(area_hi > 0.0);
  REQUIRE(area_lo > 0.0);
  const double density_ratio = (h_hi / area_hi) / (h_lo / area_lo);
  const double weight_ratio = (w_hi / area_hi) / (w_lo / area_lo);
  CHECK(density_ratio > 1.0);
  CHECK(density_ratio == doctest::Approx(weight_ratio).epsilon(0.10));
}

TEST_CASE("near-surface displacement") {
  const TriangleMesh mesh = testing::icosphere(0.8, 3);
  const double sigma = 0.01;
  const PointSampleSet s = sample_near_surface(mesh, 100000, sigma, 17);
  REQUIRE(s.data.displacements.size() == 100000);
  double mean = 0.0;
  for (std::size_t i = 0; i < s.data.points.size(); ++i) {
    const double len = norm(s.data.displacements[i]);
    REQUIRE(len <= 3 * sigma);
    const auto& t = mesh.triangles[s.source_triangle[i]];
    const double d = point_triangle_distance(s.data.points[i], mesh.vertices[t[0]], mesh.vertices[t[1]],
                                             mesh.vertices[t[2]]);
    REQUIRE(d <= 3 * sigma + 1e-12);
    REQUIRE(norm(s.data.normals[i]) == doctest::Approx(1.0).epsilon(1e-6));
    mean += len;
  }
  mean /= 1e5;
  // Oracle: truncated isotropic Gaussian simulated directly.
  std::mt19937 rng(99);
  std::normal_distribution<double> g(0.0, sigma);
  double oracle = 0.0;
  const int m = 400000;
  for (int i = 0; i < m; ++i) {
    Vec3 d;
    do {
      d = {g(rng), g(rng), g(rng)};
    } while (norm(d) > 3 * sigma);
    oracle += norm(d);
  }
  oracle /= m;
  CHECK(mean == doctest::Approx(oracle).epsilon(0.03));
  CHECK_THROWS(sample_near_surface(mesh, 10, 0.0, 1));
}

TEST_CASE("near-surface tends to area-uniform surface sampling") {
  const TriangleMesh mesh = testing::icosphere(0.8, 3);
  CurvatureWeights area;
  for (const auto& t : mesh.triangles) area.triangle_weight.push_back(triangle_area(mesh, t));
  const PointSampleSet near = sample_near_surface(mesh, 100000, 1e-9, 1);
  const PointSampleSet surf = sample_surface(mesh, area, 100000, 2);
  for (int a = 0; a < 3; ++a) {
    std::vector<double> x, y;
    for (const auto& p : near.data.points) x.push_back(p[a]);
    for (const auto& p : surf.data.points) y.push_back(p[a]);
    CHECK(ks_distance(x, y) < 0.01);
  }
}

TEST_CASE("sampling does not depend on the worker count") {
  const auto field = torus_field(0.6, 0.25);
  const TriangleMesh mesh = extracted(*field, 64);
  const CurvatureWeights w = compute_curvature(mesh);
  CHECK(sample_space(mesh, 100000, 5, 1).data == sample_space(mesh, 100000, 5, 8).data);
  CHECK(sample_surface(mesh, w, 100000, 5, 1).data == sample_surface(mesh, w, 100000, 5, 8).data);
  CHECK(sample_near_surface(mesh, 100000, 0.01, 5, 1).data == sample_near_surface(mesh, 100000, 0.01, 5, 8).data);
}

TEST_CASE("sidecar") {
  const TriangleMesh cube = testing::cube_mesh(-0.5, 0.5);
  const CurvatureWeights w = compute_curvature(cube);
  const std::string js = sample_sidecar_json(sample_surface(cube, w, 10, 3), &w);
  CHECK(js.find("\"group\": \"SURFACE\"") != std::string::npos);
  CHECK(js.find("\"seed\": 3") != std::string::npos);
  CHECK(js.find("total_defect") != std::string::npos);
}
