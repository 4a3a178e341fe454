#pragma once

#include <algorithm>
#include <optional>
#include <utility>

#include "neurar/common.hpp"

namespace neurar {

struct CameraIntrinsics {
  int width = 50;
  int height = 50;
  double vertical_fov = kPi / 3.0;  // radians

  void validate() const {
    if (width < 1 || height < 1) throw Fault("intrinsics: width/height must be >= 1");
    if (!(vertical_fov > 0.0 && vertical_fov < kPi))
      throw Fault("intrinsics: vertical_fov must be in (0, pi)");
  }
};

/// Camera pose as position + look-at target. The derived frame is
/// right-handed with the camera looking down its local -z.
struct Viewpoint {
  Vec3 position = Vec3::Zero();
  Vec3 target = Vec3(0, 0, -1);
  Vec3 up = Vec3(0, 1, 0);

  Vec3 forward() const { return (target - position).normalized(); }

  /// World-from-camera rotation, columns [right, up, -forward].
  Mat3 rotation() const {
    Vec3 f = forward();
    Vec3 r = f.cross(up).normalized();
    Vec3 u = r.cross(f);
    Mat3 m;
    m.col(0) = r;
    m.col(1) = u;
    m.col(2) = -f;
    return m;
  }

  void validate() const {
    if ((target - position).norm() < 1e-12) throw Fault("viewpoint: position equals target");
    Vec3 f = forward();
    if (f.cross(up).norm() < 1e-9) throw Fault("viewpoint: up parallel to view direction");
  }
};

struct Aabb {
  Vec3 min = Vec3::Constant(-2.5);
  Vec3 max = Vec3::Constant(2.5);

  Vec3 center() const { return 0.5 * (min + max); }
  double diagonal() const { return (max - min).norm(); }

  bool contains(const Vec3& p, double margin = 0.0) const {
    return (p.array() >= min.array() - margin).all() &&
           (p.array() <= max.array() + margin).all();
  }

  Aabb expanded_to(const Vec3& p) const {
    Aabb b = *this;
    b.min = b.min.cwiseMin(p);
    b.max = b.max.cwiseMax(p);
    return b;
  }

  Aabb inflated(double m) const { return {min - Vec3::Constant(m), max + Vec3::Constant(m)}; }

  /// Slab intersection; returns [t0, t1] with t1 >= t0 if the ray hits.
  std::optional<std::pair<double, double>> intersect(const Vec3& origin, const Vec3& dir) const {
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (std::abs(dir[a]) < 1e-300) {
        if (origin[a] < min[a] || origin[a] > max[a]) return std::nullopt;
        continue;
      }
      double inv = 1.0 / dir[a];
      double ta = (min[a] - origin[a]) * inv;
      double tb = (max[a] - origin[a]) * inv;
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return std::nullopt;
    }
    return std::make_pair(t0, t1);
  }
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3(0, 0, -1);
  double t_near = 0.0;
  double t_far = 0.0;
  bool degenerate = false;  // missed the scene bounds entirely; renders as background
};

/// Ray through pixel (px, py). Offsets (jx, jy) in [0, 1) place the sample
/// inside the pixel footprint; (0.5, 0.5) is the pixel center.
/// t_near / t_far are clipped to `bounds`.
inline Ray pixel_ray(const Viewpoint& view, const CameraIntrinsics& intr, double px, double py,
                     const Aabb& bounds, double jx = 0.5, double jy = 0.5) {
  const double tan_half = std::tan(0.5 * intr.vertical_fov);
  const double aspect = static_cast<double>(intr.width) / intr.height;
  const double u = (2.0 * (px + jx) / intr.width - 1.0) * tan_half * aspect;
  const double v = (1.0 - 2.0 * (py + jy) / intr.height) * tan_half;

  Vec3 f = view.forward();
  Vec3 r = f.cross(view.up).normalized();
  Vec3 upv = r.cross(f);

  Ray ray;
  ray.origin = view.position;
  ray.direction = (f + u * r + v * upv).normalized();
  auto hit = bounds.intersect(ray.origin, ray.direction);
  if (!hit || hit->second <= std::max(hit->first, 0.0)) {
    ray.degenerate = true;
    ray.t_near = 0.0;
    ray.t_far = bounds.diagonal();
    return ray;
  }
  ray.t_near = std::max(0.0, hit->first);
  ray.t_far = hit->second;
  return ray;
}

}  // namespace neurar
