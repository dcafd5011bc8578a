#include "meshforge/field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "meshforge/parallel.hpp"
#include "meshforge/volume.hpp"

namespace meshforge {

double evaluate_at(const ScalarField& field, const Vec3& p) {
  double v = 0.0;
  field.evaluate(std::span<const Vec3>(&p, 1), std::span<double>(&v, 1));
  return v;
}

void evaluate_parallel(const ScalarField& field, std::span<const Vec3> points,
                       std::span<double> values, std::size_t workers) {
  if (points.size() != values.size()) {
    throw std::invalid_argument("evaluate_parallel: point/value size mismatch");
  }
  parallel_for(
      points.size(), 4096,
      [&](std::size_t b, std::size_t e) {
        field.evaluate(points.subspan(b, e - b), values.subspan(b, e - b));
      },
      workers);
}

namespace {

class SphereField final : public ScalarField {
 public:
  SphereField(Vec3 center, double radius) : center_(center), radius_(radius) {}

  void evaluate(std::span<const Vec3> points, std::span<double> values) const override {
    for (std::size_t i = 0; i < points.size(); ++i) values[i] = distance(points[i], center_) - radius_;
  }

 private:
  Vec3 center_;
  double radius_;
};

class TorusField final : public ScalarField {
 public:
  TorusField(double major, double minor) : major_(major), minor_(minor) {}

  void evaluate(std::span<const Vec3> points, std::span<double> values) const override {
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Vec3& p = points[i];
      const double ring = std::hypot(p.x, p.y) - major_;
      values[i] = std::hypot(ring, p.z) - minor_;
    }
  }

 private:
  double major_;
  double minor_;
};

class CsgField final : public ScalarField {
 public:
  enum class Op { kUnion, kIntersection };

  CsgField(FieldPtr a, FieldPtr b, Op op) : a_(std::move(a)), b_(std::move(b)), op_(op) {}

  void evaluate(std::span<const Vec3> points, std::span<double> values) const override {
    std::vector<double> other(points.size());
    a_->evaluate(points, values);
    b_->evaluate(points, other);
    for (std::size_t i = 0; i < points.size(); ++i) {
      values[i] = op_ == Op::kUnion ? std::min(values[i], other[i]) : std::max(values[i], other[i]);
    }
  }

  Box bounds() const override {
    Box box = a_->bounds();
    const Box other = b_->bounds();
    box.extend(other.lo);
    box.extend(other.hi);
    return box;
  }

 private:
  FieldPtr a_;
  FieldPtr b_;
  Op op_;
};

}  // namespace

FieldPtr sphere_field(const Vec3& center, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("sphere_field: radius must be positive");
  return std::make_shared<SphereField>(center, radius);
}

FieldPtr torus_field(double major_radius, double minor_radius) {
  if (!(minor_radius > 0.0) || !(minor_radius < major_radius)) {
    throw std::invalid_argument("torus_field: need 0 < minor_radius < major_radius");
  }
  return std::make_shared<TorusField>(major_radius, minor_radius);
}

FieldPtr csg_union(FieldPtr a, FieldPtr b) {
  if (!a || !b) throw std::invalid_argument("csg_union: null operand");
  return std::make_shared<CsgField>(std::move(a), std::move(b), CsgField::Op::kUnion);
}

FieldPtr csg_intersection(FieldPtr a, FieldPtr b) {
  if (!a || !b) throw std::invalid_argument("csg_intersection: null operand");
  return std::make_shared<CsgField>(std::move(a), std::move(b), CsgField::Op::kIntersection);
}

GridField::GridField(std::array<std::size_t, 3> resolution, Vec3 origin, double spacing,
                     std::vector<float> values, double truncation)
    : resolution_(resolution),
      origin_(origin),
      spacing_(spacing),
      values_(std::move(values)),
      truncation_(truncation) {
  for (auto r : resolution_) {
    if (r < 2) throw std::invalid_argument("GridField: need at least 2 samples per axis");
  }
  if (!(spacing_ > 0.0)) throw std::invalid_argument("GridField: spacing must be positive");
  if (values_.size() != resolution_[0] * resolution_[1] * resolution_[2]) {
    throw std::invalid_argument("GridField: value count does not match resolution");
  }
}

Box GridField::bounds() const {
  const Vec3 span{spacing_ * static_cast<double>(resolution_[0] - 1),
                  spacing_ * static_cast<double>(resolution_[1] - 1),
                  spacing_ * static_cast<double>(resolution_[2] - 1)};
  return Box{origin_, origin_ + span};
}

double GridField::interpolate(const Vec3& p) const {
  std::array<std::size_t, 3> base{};
  std::array<double, 3> frac{};
  for (std::size_t a = 0; a < 3; ++a) {
    double u = (p[a] - origin_[a]) / spacing_;
    const double snapped = std::round(u);
    // Lattice points reconstructed from world coordinates land within
    // rounding error of an integer; treat them as exact samples.
    if (std::abs(u - snapped) < 1e-9) u = snapped;
    const double last = static_cast<double>(resolution_[a] - 1);
    if (!(u >= 0.0 && u <= last)) return truncation_;
    auto i = static_cast<std::size_t>(u);
    if (i >= resolution_[a] - 1) i = resolution_[a] - 2;
    base[a] = i;
    frac[a] = u - static_cast<double>(i);
  }
  auto lerp = [](double a, double b, double t) { return a * (1.0 - t) + b * t; };
  const auto [i, j, k] = base;
  const double c00 = lerp(sample(i, j, k), sample(i + 1, j, k), frac[0]);
  const double c10 = lerp(sample(i, j + 1, k), sample(i + 1, j + 1, k), frac[0]);
  const double c01 = lerp(sample(i, j, k + 1), sample(i + 1, j, k + 1), frac[0]);
  const double c11 = lerp(sample(i, j + 1, k + 1), sample(i + 1, j + 1, k + 1), frac[0]);
  return lerp(lerp(c00, c10, frac[1]), lerp(c01, c11, frac[1]), frac[2]);
}

void GridField::evaluate(std::span<const Vec3> points, std::span<double> values) const {
  for (std::size_t i = 0; i < points.size(); ++i) values[i] = interpolate(points[i]);
}

std::shared_ptr<const GridField> grid_field_from_volume(const TsdfVolume& volume) {
  if (volume.voxel_count() == 0 || volume.values.size() != volume.voxel_count()) {
    throw std::invalid_argument("grid_field_from_volume: empty or inconsistent volume");
  }
  for (auto r : volume.resolution) {
    if (r < 2) throw std::invalid_argument("grid_field_from_volume: need at least 2 voxels per axis");
  }
  const Vec3 first_center = volume.voxel_center(0, 0, 0);
  return std::make_shared<GridField>(
      std::array<std::size_t, 3>{volume.resolution[0], volume.resolution[1], volume.resolution[2]},
      first_center, volume.voxel_size, volume.values, volume.truncation);
}

}  // namespace meshforge
