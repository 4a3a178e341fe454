#pragma once

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "neurar/common.hpp"
#include "neurar/geometry.hpp"
#include "neurar/image.hpp"

namespace neurar {

enum class ShapeKind { Sphere, Box, Cylinder, Torus };

inline const char* shape_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::Sphere: return "sphere";
    case ShapeKind::Box: return "box";
    case ShapeKind::Cylinder: return "cylinder";
    case ShapeKind::Torus: return "torus";
  }
  return "?";
}

/// One colored SDF primitive. `size` is interpreted per shape:
///   sphere:   x = radius
///   box:      half-extents (x, y, z)
///   cylinder: x = radius, y = half-height (axis = local z)
///   torus:    x = major radius, y = minor radius (axis = local z)
struct Primitive {
  ShapeKind kind = ShapeKind::Sphere;
  Vec3 position = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  Vec3 size = Vec3(1, 1, 1);
  Vec3 albedo = Vec3(0.8, 0.8, 0.8);

  double sdf(const Vec3& world_p) const {
    Vec3 p = rotation.transpose() * (world_p - position);
    switch (kind) {
      case ShapeKind::Sphere:
        return p.norm() - size.x();
      case ShapeKind::Box: {
        Vec3 q = p.cwiseAbs() - size;
        double outside = q.cwiseMax(0.0).norm();
        double inside = std::min(q.maxCoeff(), 0.0);
        return outside + inside;
      }
      case ShapeKind::Cylinder: {
        double dr = std::hypot(p.x(), p.y()) - size.x();
        double dz = std::abs(p.z()) - size.y();
        double outside = std::hypot(std::max(dr, 0.0), std::max(dz, 0.0));
        double inside = std::min(std::max(dr, dz), 0.0);
        return outside + inside;
      }
      case ShapeKind::Torus: {
        double qx = std::hypot(p.x(), p.y()) - size.x();
        return std::hypot(qx, p.z()) - size.y();
      }
    }
    return std::numeric_limits<double>::infinity();
  }

  /// Loose radius bound used for surface-area weighting and containment checks.
  double bounding_radius() const {
    switch (kind) {
      case ShapeKind::Sphere: return size.x();
      case ShapeKind::Box: return size.norm();
      case ShapeKind::Cylinder: return std::hypot(size.x(), size.y());
      case ShapeKind::Torus: return size.x() + size.y();
    }
    return 0.0;
  }
};

inline Mat3 axis_angle_rotation(const Vec3& axis, double radians) {
  if (axis.norm() < 1e-12) return Mat3::Identity();
  return Eigen::AngleAxisd(radians, axis.normalized()).toRotationMatrix();
}

/// Additive depth-noise model, quadratic in depth.
struct DepthNoiseModel {
  double a_mu = 0.0001125;
  double b_mu = 0.0048875;
  double a_sigma = 0.002925;
  double b_sigma = 0.003325;
  double scale = 1.0;

  double mu(double z) const { return scale * (a_mu * z * z + b_mu); }
  double sigma(double z) const { return scale * (a_sigma * z * z + b_sigma); }
};

/// Procedural ground-truth world: colored SDF primitives inside an axis
/// aligned bounding box. Immutable after construction; every query is pure.
struct SceneSdf {
  std::vector<Primitive> primitives;
  Aabb bounds;
  Vec3 background_color = Vec3(0.06, 0.06, 0.09);
  std::string name = "scene";

  static constexpr int kMaxTraceSteps = 256;
  static constexpr double kHitThreshold = 1e-4;

  double sdf(const Vec3& p) const {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& prim : primitives) d = std::min(d, prim.sdf(p));
    return d;
  }

  int nearest_primitive(const Vec3& p) const {
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < primitives.size(); ++i) {
      double d = primitives[i].sdf(p);
      if (d < bd) {
        bd = d;
        best = static_cast<int>(i);
      }
    }
    return best;
  }

  Vec3 normal(const Vec3& p) const {
    constexpr double h = 1e-5;
    Vec3 n;
    for (int a = 0; a < 3; ++a) {
      Vec3 e = Vec3::Zero();
      e[a] = h;
      n[a] = sdf(p + e) - sdf(p - e);
    }
    double len = n.norm();
    return len > 0.0 ? Vec3(n / len) : Vec3(0, 1, 0);
  }

  void validate() const {
    for (const auto& prim : primitives) {
      double r = prim.bounding_radius();
      Vec3 p = prim.position;
      if (!bounds.contains(p - Vec3::Constant(r), -0.0) || !bounds.contains(p + Vec3::Constant(r)))
        throw Fault(std::string("scene: primitive ") + shape_name(prim.kind) +
                    " extends outside bounds");
    }
  }
};

/// Directional light used by the oracle's Lambert shading. Fixed so renders
/// are reproducible and view-consistent.
inline const Vec3 kLightDirection = Vec3(0.4, 0.7, -0.6).normalized();
inline constexpr double kAmbient = 0.2;

struct TraceHit {
  bool hit = false;
  double t = 0.0;
  Vec3 point = Vec3::Zero();
};

/// Sphere-traces a single ray from `origin` along unit `dir`. Marching starts
/// at the bounds entry; surfaces beyond entry + diagonal are misses (all
/// primitives live inside the bounds, so nothing real is lost).
inline TraceHit sphere_trace(const SceneSdf& scene, const Vec3& origin, const Vec3& dir) {
  TraceHit out;
  if (scene.primitives.empty()) return out;
  auto clip = scene.bounds.intersect(origin, dir);
  if (!clip || clip->second < 0.0) return out;
  double t = std::max(0.0, clip->first);
  const double t_max = t + scene.bounds.diagonal();
  for (int step = 0; step < SceneSdf::kMaxTraceSteps && t <= t_max; ++step) {
    Vec3 p = origin + t * dir;
    double d = scene.sdf(p);
    if (d < SceneSdf::kHitThreshold) {
      out.hit = true;
      out.t = t;
      out.point = p;
      return out;
    }
    t += d;
  }
  return out;
}

/// Renders a ground-truth RGBD image by per-pixel sphere tracing.
/// Color = albedo * (ambient + (1 - ambient) * max(0, n . l)); misses get the
/// background color and depth 0. Deterministic: no sampling involved.
inline RgbdImage trace_rgbd(const SceneSdf& scene, const Viewpoint& view,
                            const CameraIntrinsics& intr) {
  view.validate();
  intr.validate();
  RgbdImage img(intr.width, intr.height);
  img.pose = view;
  Vec3 f = view.forward();
  Vec3 r = f.cross(view.up).normalized();
  Vec3 upv = r.cross(f);
  const double tan_half = std::tan(0.5 * intr.vertical_fov);
  const double aspect = static_cast<double>(intr.width) / intr.height;
  for (int y = 0; y < intr.height; ++y) {
    for (int x = 0; x < intr.width; ++x) {
      const double u = (2.0 * (x + 0.5) / intr.width - 1.0) * tan_half * aspect;
      const double v = (1.0 - 2.0 * (y + 0.5) / intr.height) * tan_half;
      Vec3 dir = (f + u * r + v * upv).normalized();
      TraceHit hit = sphere_trace(scene, view.position, dir);
      if (hit.hit) {
        int pi = scene.nearest_primitive(hit.point);
        Vec3 n = scene.normal(hit.point);
        double lambert = std::max(0.0, n.dot(kLightDirection));
        double shade = kAmbient + (1.0 - kAmbient) * lambert;
        img.set_color(x, y, scene.primitives[pi].albedo * shade);
        img.set_depth(x, y, hit.t);
      } else {
        img.set_color(x, y, scene.background_color);
        img.set_depth(x, y, 0.0);
      }
    }
  }
  return img;
}

/// Adds independent Gaussian noise e ~ N(mu(z), sigma(z)) to every valid
/// (depth > 0) pixel. One draw is consumed per pixel regardless of validity
/// so a pixel's noise does not depend on the hole pattern elsewhere.
inline std::vector<double> add_depth_noise(const std::vector<double>& depth,
                                           const DepthNoiseModel& model, std::uint64_t seed) {
  std::vector<double> out(depth.size());
  RngStream rng(seed);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    double n = rng.normal();
    double z = depth[i];
    out[i] = (z > 0.0) ? z + model.mu(z) + model.sigma(z) * n : z;
  }
  return out;
}

inline void add_depth_noise_in_place(RgbdImage& img, const DepthNoiseModel& model,
                                     std::uint64_t seed) {
  img.depth = add_depth_noise(img.depth, model, seed);
}

/// True iff the segment p-q keeps at least `clearance` distance from every
/// surface, sampled at spacing <= clearance / 2. Exactly symmetric in (p, q):
/// endpoints are canonicalized before sampling.
inline bool collision_free(const SceneSdf& scene, const Vec3& p, const Vec3& q, double clearance) {
  if (!(clearance > 0.0)) throw Fault("collision_free: clearance must be > 0");
  Vec3 a = p, b = q;
  if (std::lexicographical_compare(b.data(), b.data() + 3, a.data(), a.data() + 3))
    std::swap(a, b);
  const double len = (b - a).norm();
  const int n = std::max(1, static_cast<int>(std::ceil(len / (0.5 * clearance))));
  for (int i = 0; i <= n; ++i) {
    Vec3 s = a + (static_cast<double>(i) / n) * (b - a);
    if (scene.sdf(s) < clearance) return false;
  }
  return true;
}

// ---- Canned scenes --------------------------------------------------------

inline SceneSdf make_blobs_scene() {
  SceneSdf s;
  s.name = "blobs";
  s.bounds = {Vec3::Constant(-2.5), Vec3::Constant(2.5)};
  s.background_color = Vec3(0.06, 0.06, 0.09);
  Primitive a;
  a.kind = ShapeKind::Sphere;
  a.position = Vec3(0.55, 0.0, 0.15);
  a.size = Vec3(0.55, 0, 0);
  a.albedo = Vec3(0.85, 0.25, 0.20);
  Primitive b;
  b.kind = ShapeKind::Sphere;
  b.position = Vec3(-0.55, 0.25, -0.35);
  b.size = Vec3(0.40, 0, 0);
  b.albedo = Vec3(0.20, 0.70, 0.30);
  Primitive c;
  c.kind = ShapeKind::Sphere;
  c.position = Vec3(-0.10, -0.50, 0.45);
  c.size = Vec3(0.30, 0, 0);
  c.albedo = Vec3(0.25, 0.40, 0.85);
  Primitive d;
  d.kind = ShapeKind::Box;
  d.position = Vec3(0.05, 0.55, -0.15);
  d.rotation = axis_angle_rotation(Vec3(0, 1, 0), kPi / 6.0);
  d.size = Vec3(0.45, 0.25, 0.35);
  d.albedo = Vec3(0.85, 0.75, 0.25);
  s.primitives = {a, b, c, d};
  return s;
}

/// Pedestal box with a torus "roof" above it; the ring's underside and the
/// box top beneath it are occluded from above.
inline SceneSdf make_arch_scene() {
  SceneSdf s;
  s.name = "arch";
  s.bounds = {Vec3::Constant(-2.5), Vec3::Constant(2.5)};
  s.background_color = Vec3(0.07, 0.06, 0.08);
  Primitive base;
  base.kind = ShapeKind::Box;
  base.position = Vec3(0.0, -0.62, 0.0);
  base.size = Vec3(0.75, 0.12, 0.75);
  base.albedo = Vec3(0.75, 0.70, 0.60);
  Primitive roof;
  roof.kind = ShapeKind::Torus;
  roof.position = Vec3(0.0, -0.10, 0.0);
  roof.rotation = axis_angle_rotation(Vec3(1, 0, 0), kPi / 2.0);  // ring axis -> world y
  roof.size = Vec3(0.55, 0.18, 0);
  roof.albedo = Vec3(0.80, 0.30, 0.25);
  Primitive post;
  post.kind = ShapeKind::Cylinder;
  post.position = Vec3(0.0, -0.30, 0.0);
  post.rotation = axis_angle_rotation(Vec3(1, 0, 0), kPi / 2.0);
  post.size = Vec3(0.10, 0.20, 0);
  post.albedo = Vec3(0.30, 0.55, 0.75);
  s.primitives = {base, roof, post};
  return s;
}

}  // namespace neurar
