#pragma once

#include <vector>

#include "neurar/field.hpp"
#include "neurar/geometry.hpp"
#include "neurar/image.hpp"

namespace neurar {

/// One uniform draw per equal bin of [t_near, t_far]; strictly ascending.
inline VecX sample_stratified(const Ray& ray, int n_samples, RngStream& rng) {
  if (n_samples < 2) throw Fault("sample_stratified: need at least 2 samples");
  VecX t(n_samples);
  const double w = (ray.t_far - ray.t_near) / n_samples;
  for (int i = 0; i < n_samples; ++i) t[i] = ray.t_near + (i + rng.uniform()) * w;
  return t;
}

/// Front-to-back compositing weights from densities and inter-sample
/// distances: o_i = 1 - exp(-rho_i delta_i), w_i = o_i prod_{j<i}(1 - o_j).
/// Also returns the transmittance T_i before each sample and the residual
/// T_end = 1 - sum(w); both are needed by the backward pass.
struct CompositeResult {
  VecX weights;
  VecX transmittance;  // T_i before sample i
  double residual = 1.0;  // T after the last sample (background mass)
};

inline CompositeResult composite_weights(const VecX& densities, const VecX& deltas) {
  const long n = densities.size();
  if (deltas.size() != n) throw Fault("composite_weights: size mismatch");
  CompositeResult out;
  out.weights.resize(n);
  out.transmittance.resize(n);
  double t = 1.0;
  for (long i = 0; i < n; ++i) {
    const double a = densities[i] * deltas[i];
    out.transmittance[i] = t;
    out.weights[i] = t * (-std::expm1(-a));
    t *= std::exp(-a);
  }
  out.residual = t;
  return out;
}

/// Per-ray aggregates of the probabilistic rendering:
/// mu_r = sum w_i mu_i + residual * background
/// var_r = sum w_i exp(s_i)
/// depth = sum w_i t_i + residual * t_far
struct RenderedPixel {
  Vec3 mu_r = Vec3::Zero();
  double var_r = 0.0;
  double depth = 0.0;
  double opacity = 0.0;
  VecX weights;  // retained for gradients
};

/// Sample positions/outputs along one ray, already evaluated by the field.
struct RaySampleSet {
  VecX t_values;
  VecX deltas;
  Mat3X mu;              // 3 x N
  VecX exp_s;            // exp(s_i)
  VecX rho;
  double t_far = 0.0;
};

/// delta_i = t_{i+1} - t_i; the last delta is capped at (t_far - t_N).
inline VecX sample_deltas(const VecX& t, double t_far) {
  const long n = t.size();
  VecX d(n);
  for (long i = 0; i + 1 < n; ++i) d[i] = t[i + 1] - t[i];
  d[n - 1] = t_far - t[n - 1];
  for (long i = 0; i < n; ++i)
    if (!(d[i] > 0.0)) throw Fault("sample deltas must be positive (t not strictly ascending?)");
  return d;
}

inline RenderedPixel render_pixel(const RaySampleSet& set, const Vec3& background) {
  RenderedPixel px;
  if (set.t_values.size() == 0) {
    px.mu_r = background;
    px.depth = set.t_far;
    return px;
  }
  CompositeResult comp = composite_weights(set.rho, set.deltas);
  px.weights = comp.weights;
  px.opacity = comp.weights.sum();
  px.mu_r = set.mu * comp.weights + comp.residual * background;
  px.var_r = comp.weights.dot(set.exp_s);
  px.depth = comp.weights.dot(set.t_values) + comp.residual * set.t_far;
  return px;
}

/// Cotangents of one rendered pixel w.r.t. the per-sample field outputs.
/// Inputs are dL/d(mu_r), dL/d(var_r), dL/d(depth); outputs are dL/d(mu_i),
/// dL/d(s_i), dL/d(rho_i) for every sample of the ray.
struct RayBackward {
  Mat3X d_mu;
  VecX d_s;
  VecX d_rho;
};

inline RayBackward render_pixel_backward(const RaySampleSet& set, const Vec3& background,
                                         const Vec3& d_mu_r, double d_var, double d_depth) {
  const long n = set.t_values.size();
  RayBackward out;
  out.d_mu = Mat3X::Zero(3, n);
  out.d_s = VecX::Zero(n);
  out.d_rho = VecX::Zero(n);
  if (n == 0) return out;
  CompositeResult comp = composite_weights(set.rho, set.deltas);

  // Per-sample sensitivity of the loss to w_i, and to the residual mass.
  VecX c(n);
  for (long i = 0; i < n; ++i)
    c[i] = d_mu_r.dot(set.mu.col(i)) + d_var * set.exp_s[i] + d_depth * set.t_values[i];
  const double c_bg = d_mu_r.dot(background) + d_depth * set.t_far;

  // dL/da_i = c_i T_{i+1} - sum_{k>i} c_k w_k - c_bg T_end, a_i = rho_i delta_i.
  double suffix = 0.0;
  for (long i = n - 1; i >= 0; --i) {
    const double a = set.rho[i] * set.deltas[i];
    const double t_next = comp.transmittance[i] * std::exp(-a);
    const double da = c[i] * t_next - suffix - c_bg * comp.residual;
    out.d_rho[i] = set.deltas[i] * da;
    out.d_mu.col(i) = comp.weights[i] * d_mu_r;
    out.d_s[i] = d_var * comp.weights[i] * set.exp_s[i];
    suffix += c[i] * comp.weights[i];
  }
  return out;
}

/// Full-view render against a parameter snapshot.
struct RenderedView {
  RgbdImage image;       // rendered color + expected depth
  std::vector<double> variance;     // per rendered pixel var_r
  std::vector<double> uncertainty;  // normalized log variance, for visualization
  double mean_variance = 0.0;       // sigma_I^2 of the view
  int stride = 1;
};

struct RenderOptions {
  int n_samples = 64;
  int stride = 1;
  std::uint64_t seed = 0;
  Aabb bounds;
  Vec3 background = Vec3::Zero();
};

/// Renders every stride-th pixel; rays are stratified per pixel from a stream
/// derived from `seed`, so identical calls give identical images.
/// sigma_I^2 of the view is the mean var_r over rendered pixels.
inline RenderedView render_image(const FieldParams& params, const Viewpoint& view,
                                 const CameraIntrinsics& intr, const RenderOptions& opt) {
  if (opt.stride < 1) throw Fault("render_image: stride must be >= 1");
  const int out_w = (intr.width + opt.stride - 1) / opt.stride;
  const int out_h = (intr.height + opt.stride - 1) / opt.stride;
  RenderedView rv;
  rv.stride = opt.stride;
  rv.image = RgbdImage(out_w, out_h);
  rv.image.pose = view;
  rv.variance.assign(static_cast<std::size_t>(out_w) * out_h, 0.0);
  rv.uncertainty.assign(static_cast<std::size_t>(out_w) * out_h, 0.0);

  RngStream rng(derive_seed(opt.seed, "render_image"));
  const int n = opt.n_samples;
  std::vector<Ray> rays(static_cast<std::size_t>(out_w) * out_h);
  std::vector<VecX> ts(rays.size());
  for (int oy = 0; oy < out_h; ++oy)
    for (int ox = 0; ox < out_w; ++ox) {
      const std::size_t idx = static_cast<std::size_t>(oy) * out_w + ox;
      rays[idx] = pixel_ray(view, intr, ox * opt.stride, oy * opt.stride, opt.bounds);
      if (!rays[idx].degenerate) ts[idx] = sample_stratified(rays[idx], n, rng);
    }

  // Evaluate the field in chunks of pixels to keep matrices cache-friendly.
  const long chunk_px = std::max<long>(1, 16384 / n);
  double var_sum = 0.0;
  for (std::size_t begin = 0; begin < rays.size(); begin += chunk_px) {
    const std::size_t end = std::min(rays.size(), begin + chunk_px);
    std::vector<std::size_t> live;
    for (std::size_t i = begin; i < end; ++i)
      if (!rays[i].degenerate) live.push_back(i);
    FieldForwardCache cache;
    if (!live.empty()) {
      Mat3X xs(3, live.size() * n), ds(3, live.size() * n);
      for (std::size_t k = 0; k < live.size(); ++k) {
        const Ray& r = rays[live[k]];
        for (int j = 0; j < n; ++j) {
          xs.col(k * n + j) = r.origin + ts[live[k]][j] * r.direction;
          ds.col(k * n + j) = r.direction;
        }
      }
      cache = field_forward_batch(params, xs, ds);
    }
    for (std::size_t i = begin, k = 0; i < end; ++i) {
      RaySampleSet set;
      set.t_far = rays[i].t_far;
      if (!rays[i].degenerate) {
        set.t_values = ts[i];
        set.deltas = sample_deltas(ts[i], rays[i].t_far);
        set.mu = cache.mu.middleCols(k * n, n);
        set.exp_s = cache.s.segment(k * n, n).array().exp();
        set.rho = cache.rho.segment(k * n, n);
        ++k;
      }
      RenderedPixel px = render_pixel(set, opt.background);
      const int ox = static_cast<int>((i) % out_w);
      const int oy = static_cast<int>((i) / out_w);
      rv.image.set_color(ox, oy, px.mu_r);
      rv.image.set_depth(ox, oy, px.depth);
      rv.variance[i] = px.var_r;
      var_sum += px.var_r;
    }
  }
  rv.mean_variance = var_sum / static_cast<double>(rays.size());

  // Visualization map: normalized log variance (monotone in var_r).
  constexpr double kVarFloor = 1e-12;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : rv.variance) {
    double l = std::log(std::max(v, kVarFloor));
    lo = std::min(lo, l);
    hi = std::max(hi, l);
  }
  const double span = hi - lo;
  for (std::size_t i = 0; i < rv.variance.size(); ++i) {
    double l = std::log(std::max(rv.variance[i], kVarFloor));
    rv.uncertainty[i] = span > 0.0 ? (l - lo) / span : 0.0;
  }
  return rv;
}

}  // namespace neurar
