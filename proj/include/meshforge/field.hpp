#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "meshforge/geometry.hpp"

namespace meshforge {

struct TsdfVolume;

/// Implicit field queried in batches. Negative strictly inside, positive
/// strictly outside, zero on the isosurface. Implementations are immutable
/// after construction and safe to evaluate from any number of threads.
class ScalarField {
 public:
  virtual ~ScalarField() = default;

  /// values[i] = field(points[i]); both spans have the same length.
  virtual void evaluate(std::span<const Vec3> points, std::span<double> values) const = 0;

  /// Declared domain. Analytic fields report [-1,1]^3 but evaluate anywhere.
  virtual Box bounds() const { return Box::cube(1.0); }
};

using FieldPtr = std::shared_ptr<const ScalarField>;

/// Single-point convenience; a batch of one.
double evaluate_at(const ScalarField& field, const Vec3& p);

/// Splits the batch across workers. Output is bitwise identical to a
/// sequential evaluate() call.
void evaluate_parallel(const ScalarField& field, std::span<const Vec3> points,
                       std::span<double> values, std::size_t workers = 0);

/// |p - center| - radius. Throws std::invalid_argument unless radius > 0.
FieldPtr sphere_field(const Vec3& center, double radius);

/// Exact torus SDF around the z axis. Requires 0 < minor < major.
FieldPtr torus_field(double major_radius, double minor_radius);

/// min(a, b).
FieldPtr csg_union(FieldPtr a, FieldPtr b);
/// max(a, b).
FieldPtr csg_intersection(FieldPtr a, FieldPtr b);

/// Dense samples on a regular lattice, trilinearly interpolated. Sample
/// (i, j, k) sits at origin + spacing * (i, j, k). Queries outside the
/// lattice hull return +truncation.
class GridField final : public ScalarField {
 public:
  GridField(std::array<std::size_t, 3> resolution, Vec3 origin, double spacing,
            std::vector<float> values, double truncation);

  void evaluate(std::span<const Vec3> points, std::span<double> values) const override;
  Box bounds() const override;

  const std::array<std::size_t, 3>& resolution() const { return resolution_; }
  const Vec3& origin() const { return origin_; }
  double spacing() const { return spacing_; }
  double truncation() const { return truncation_; }
  /// x-fastest sample array.
  const std::vector<float>& values() const { return values_; }

  double sample(std::size_t i, std::size_t j, std::size_t k) const {
    return values_[(k * resolution_[1] + j) * resolution_[0] + i];
  }

 private:
  double interpolate(const Vec3& p) const;

  std::array<std::size_t, 3> resolution_;
  Vec3 origin_;
  double spacing_;
  std::vector<float> values_;
  double truncation_;
};

/// Lattice samples at the voxel centers of `volume`; truncation is the
/// volume's delta. Requires at least 2 voxels per axis.
std::shared_ptr<const GridField> grid_field_from_volume(const TsdfVolume& volume);

}  // namespace meshforge
