#include <algorithm>
#include <list>
#include <random>

#include "meshforge/meshkit.hpp"

namespace meshforge {

namespace {

// Smallest ball with a given support set, grown one boundary point at a
// time. The center stays in the affine hull of the support points
// (orthogonalized incrementally).
class SupportBall {
 public:
  int size() const { return m_; }
  // The most recently computed ball; pop() does not restore it.
  const Vec3& center() const { return center_; }
  double squared_radius() const { return r2_current_; }
  double excess(const Vec3& p) const { return squared_norm(p - center_) - r2_current_; }

  bool push(const Vec3& p) {
    if (m_ == 0) {
      q0_ = p;
      c_[0] = p;
      r2_[0] = 0.0;
    } else {
      const Vec3 q = p - q0_;
      Vec3 v = q;
      for (int i = 1; i < m_; ++i) v -= v_[i] * (dot(v_[i], q) * 2.0 / z_[i]);
      const double z = 2.0 * squared_norm(v);
      // Affinely dependent on the current support: no new sphere.
      if (z <= 1e-30 * std::max(r2_current_, squared_norm(q))) return false;
      v_[m_] = v;
      z_[m_] = z;
      const double e = squared_norm(p - c_[m_ - 1]) - r2_[m_ - 1];
      const double f = e / z;
      c_[m_] = c_[m_ - 1] + v * f;
      r2_[m_] = r2_[m_ - 1] + e * f / 2.0;
    }
    center_ = c_[m_];
    r2_current_ = r2_[m_];
    ++m_;
    return true;
  }
  void pop() { --m_; }

 private:
  int m_ = 0;
  Vec3 q0_;
  std::array<Vec3, 4> v_{};
  std::array<double, 4> z_{};
  std::array<Vec3, 4> c_{};
  std::array<double, 4> r2_{};
  Vec3 center_;
  double r2_current_ = -1.0;
};

class MoveToFront {
 public:
  explicit MoveToFront(std::list<Vec3> points) : points_(std::move(points)) {}

  void run(std::list<Vec3>::iterator end) {
    if (ball_.size() == 4) return;
    for (auto k = points_.begin(); k != end;) {
      const auto j = k++;
      if (ball_.excess(*j) > 0.0 && ball_.push(*j)) {
        run(j);
        ball_.pop();
        points_.splice(points_.begin(), points_, j);
      }
    }
  }

  void solve() { run(points_.end()); }

  const SupportBall& ball() const { return ball_; }

 private:
  std::list<Vec3> points_;
  SupportBall ball_;
};

}  // namespace

BoundingSphere welzl_sphere(std::span<const Vec3> points, std::uint64_t seed) {
  if (points.empty()) throw std::invalid_argument("welzl_sphere: no points");
  std::vector<Vec3> shuffled(points.begin(), points.end());
  std::mt19937_64 rng(seed);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  MoveToFront mtf(std::list<Vec3>(shuffled.begin(), shuffled.end()));
  mtf.solve();
  return {mtf.ball().center(), std::sqrt(std::max(0.0, mtf.ball().squared_radius()))};
}

}  // namespace meshforge
