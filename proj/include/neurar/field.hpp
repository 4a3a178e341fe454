#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "neurar/common.hpp"

namespace neurar {

/// Architecture of the implicit scene function F(x, d) = (mu, s, rho).
/// Positions and directions get sin/cos frequency encodings; the trunk is a
/// ReLU MLP over the position encoding with one optional skip concatenation.
/// Density and the uncertainty branch tap the trunk feature (so both are
/// independent of d); the color head additionally sees the direction encoding.
struct FieldConfig {
  int pe_frequencies_position = 6;
  int pe_frequencies_direction = 2;
  int trunk_layers = 4;
  int trunk_width = 64;
  int uncertainty_branch_width = 32;
  int skip_connection_layer = 2;  // -1 = no skip

  int position_encoding_dim() const { return 3 * (2 * pe_frequencies_position + 1); }
  int direction_encoding_dim() const { return 3 * (2 * pe_frequencies_direction + 1); }
  int color_hidden_width() const { return std::max(8, trunk_width / 2); }

  void validate() const {
    if (pe_frequencies_position < 1 || pe_frequencies_direction < 1)
      throw Fault("field config: encoding frequency counts must be >= 1");
    if (trunk_layers < 1 || trunk_width < 4 || uncertainty_branch_width < 4)
      throw Fault("field config: layer counts must be >= 1 and widths >= 4");
    if (skip_connection_layer >= trunk_layers)
      throw Fault("field config: skip layer out of range");
  }

  bool operator==(const FieldConfig&) const = default;
};

/// Sin/cos frequency encoding:
/// [x, sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^{L-1} pi x), cos(2^{L-1} pi x)]
/// applied per coordinate, frequency blocks interleaved as
/// [x y z | sin f0 (xyz) | cos f0 (xyz) | sin f1 (xyz) | ...].
inline VecX positional_encode(const Vec3& x, int frequencies) {
  VecX out(3 * (2 * frequencies + 1));
  out.head<3>() = x;
  double freq = kPi;
  for (int l = 0; l < frequencies; ++l, freq *= 2.0) {
    for (int c = 0; c < 3; ++c) {
      out[3 + 6 * l + c] = std::sin(freq * x[c]);
      out[3 + 6 * l + 3 + c] = std::cos(freq * x[c]);
    }
  }
  return out;
}

inline void positional_encode_batch(const Mat3X& xs, int frequencies, MatX& out) {
  const int n = static_cast<int>(xs.cols());
  out.resize(3 * (2 * frequencies + 1), n);
  out.topRows<3>() = xs;
  double freq = kPi;
  for (int l = 0; l < frequencies; ++l, freq *= 2.0) {
    out.middleRows(3 + 6 * l, 3) = (freq * xs.array()).sin();
    out.middleRows(3 + 6 * l + 3, 3) = (freq * xs.array()).cos();
  }
}

struct TensorSlice {
  std::string name;
  int rows = 0;
  int cols = 0;
  long offset = 0;
  long size() const { return static_cast<long>(rows) * cols; }
};

/// Flat parameter vector plus the layout table mapping layers to slices.
/// Weight matrices are stored column-major inside the flat vector.
class FieldParams {
 public:
  FieldParams() = default;

  explicit FieldParams(const FieldConfig& config) : config_(config) {
    config.validate();
    const int p = config.position_encoding_dim();
    const int q = config.direction_encoding_dim();
    const int w = config.trunk_width;
    const int b = config.uncertainty_branch_width;
    const int c = config.color_hidden_width();
    long off = 0;
    auto add = [&](const std::string& name, int rows, int cols) {
      layout_.push_back({name, rows, cols, off});
      off += static_cast<long>(rows) * cols;
    };
    for (int i = 0; i < config.trunk_layers; ++i) {
      int in = (i == 0) ? p : (i == config.skip_connection_layer ? w + p : w);
      add("trunk_w" + std::to_string(i), w, in);
      add("trunk_b" + std::to_string(i), w, 1);
    }
    add("density_w", 1, w);
    add("density_b", 1, 1);
    add("unc_w", b, w);
    add("unc_b", b, 1);
    add("s_w", 1, b);
    add("s_b", 1, 1);
    add("color_hidden_w", c, w + q);
    add("color_hidden_b", c, 1);
    add("color_out_w", 3, c);
    add("color_out_b", 3, 1);
    values = VecX::Zero(off);
  }

  const FieldConfig& config() const { return config_; }
  const std::vector<TensorSlice>& layout() const { return layout_; }
  long parameter_count() const { return values.size(); }

  const TensorSlice& slice(const std::string& name) const {
    for (const auto& s : layout_)
      if (s.name == name) return s;
    throw Fault("field params: no slice named " + name);
  }

  Eigen::Map<const MatX> matrix(const TensorSlice& s) const {
    return {values.data() + s.offset, s.rows, s.cols};
  }
  Eigen::Map<MatX> matrix(const TensorSlice& s) {
    return {values.data() + s.offset, s.rows, s.cols};
  }
  Eigen::Map<const MatX> matrix(const std::string& name) const { return matrix(slice(name)); }
  Eigen::Map<MatX> matrix(const std::string& name) { return matrix(slice(name)); }

  /// He-style uniform fan-in init for hidden layers; the final mu / s / rho
  /// heads start at zero so the untrained field outputs
  /// mu = 0.5, s = 0, rho = softplus(0).
  void initialize(std::uint64_t seed) {
    RngStream rng(seed);
    values.setZero();
    for (const auto& s : layout_) {
      const bool is_weight = s.cols > 1 || s.name.ends_with("_w");
      const bool zero_head =
          s.name.starts_with("density_") || s.name.starts_with("s_") || s.name.starts_with("color_out_");
      if (!is_weight || zero_head) continue;
      const double limit = std::sqrt(6.0 / s.cols);
      auto m = matrix(s);
      for (long j = 0; j < m.size(); ++j) m.data()[j] = rng.uniform(-limit, limit);
    }
  }

  VecX values;

 private:
  FieldConfig config_;
  std::vector<TensorSlice> layout_;
};

/// Per-point outputs: color mean in [0,1], log-variance s, density >= 0.
struct FieldOutput {
  Vec3 mu = Vec3::Constant(0.5);
  double s = 0.0;
  double rho = 0.0;
};

/// Activations cached by the batched forward pass for the exact backward.
struct FieldForwardCache {
  MatX pe_x;                 // P x B
  MatX pe_d;                 // Q x B
  std::vector<MatX> trunk;   // post-ReLU, W x B each
  MatX unc_hidden;           // branch width x B
  MatX color_in;             // (W + Q) x B
  MatX color_hidden;         // C x B
  Mat3X mu;                  // 3 x B, sigmoid applied
  Eigen::RowVectorXd s;      // 1 x B
  Eigen::RowVectorXd rho;    // 1 x B, softplus applied
  long batch() const { return mu.cols(); }
};

namespace detail {
inline void relu_in_place(MatX& m) { m = m.cwiseMax(0.0); }
}

/// Batched forward: positions (3 x B) and unit directions (3 x B) to
/// (mu, s, rho) with cached activations. Deterministic.
inline FieldForwardCache field_forward_batch(const FieldParams& params, const Mat3X& xs,
                                             const Mat3X& ds) {
  if (!params.values.allFinite()) throw Fault("field forward: non-finite parameters");
  const FieldConfig& cfg = params.config();
  FieldForwardCache cache;
  positional_encode_batch(xs, cfg.pe_frequencies_position, cache.pe_x);
  positional_encode_batch(ds, cfg.pe_frequencies_direction, cache.pe_d);
  const long batch = xs.cols();

  cache.trunk.resize(cfg.trunk_layers);
  for (int i = 0; i < cfg.trunk_layers; ++i) {
    auto w = params.matrix("trunk_w" + std::to_string(i));
    auto b = params.matrix("trunk_b" + std::to_string(i));
    MatX& h = cache.trunk[i];
    if (i == 0) {
      h.noalias() = w * cache.pe_x;
    } else if (i == cfg.skip_connection_layer) {
      h.noalias() = w.leftCols(cfg.trunk_width) * cache.trunk[i - 1];
      h.noalias() += w.rightCols(cache.pe_x.rows()) * cache.pe_x;
    } else {
      h.noalias() = w * cache.trunk[i - 1];
    }
    h.colwise() += b.col(0);
    detail::relu_in_place(h);
  }
  const MatX& feat = cache.trunk.back();

  // density head, softplus
  Eigen::RowVectorXd rho_pre =
      (params.matrix("density_w") * feat).row(0) + Eigen::RowVectorXd::Constant(batch, params.matrix("density_b")(0, 0));
  cache.rho = rho_pre.unaryExpr([](double v) {
    return v > 30.0 ? v : std::log1p(std::exp(v));
  });

  // uncertainty branch, linear log-variance output
  cache.unc_hidden.noalias() = params.matrix("unc_w") * feat;
  cache.unc_hidden.colwise() += params.matrix("unc_b").col(0);
  detail::relu_in_place(cache.unc_hidden);
  cache.s = (params.matrix("s_w") * cache.unc_hidden).row(0) +
            Eigen::RowVectorXd::Constant(batch, params.matrix("s_b")(0, 0));

  // color head over [trunk feature; direction encoding], sigmoid output
  cache.color_in.resize(feat.rows() + cache.pe_d.rows(), batch);
  cache.color_in.topRows(feat.rows()) = feat;
  cache.color_in.bottomRows(cache.pe_d.rows()) = cache.pe_d;
  cache.color_hidden.noalias() = params.matrix("color_hidden_w") * cache.color_in;
  cache.color_hidden.colwise() += params.matrix("color_hidden_b").col(0);
  detail::relu_in_place(cache.color_hidden);
  MatX mu_pre = params.matrix("color_out_w") * cache.color_hidden;
  mu_pre.colwise() += params.matrix("color_out_b").col(0);
  cache.mu = mu_pre.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  return cache;
}

/// Single-point convenience wrapper.
inline FieldOutput field_forward(const FieldParams& params, const Vec3& x, const Vec3& d) {
  Mat3X xs(3, 1), ds(3, 1);
  xs.col(0) = x;
  ds.col(0) = d;
  FieldForwardCache c = field_forward_batch(params, xs, ds);
  return {c.mu.col(0), c.s[0], c.rho[0]};
}

/// Exact reverse-mode gradient of the batch outputs w.r.t. every parameter,
/// accumulated (summed) over the batch. `d_mu`, `d_s`, `d_rho` are the
/// cotangents of the cached forward's outputs.
inline VecX field_backward_batch(const FieldParams& params, const FieldForwardCache& cache,
                                 const Mat3X& d_mu, const Eigen::RowVectorXd& d_s,
                                 const Eigen::RowVectorXd& d_rho) {
  const FieldConfig& cfg = params.config();
  if (d_mu.cols() != cache.batch() || d_s.cols() != cache.batch() || d_rho.cols() != cache.batch())
    throw Fault("field backward: cotangent shape does not match cache");
  VecX grad = VecX::Zero(params.parameter_count());
  auto g = [&](const std::string& name) {
    const TensorSlice& s = params.slice(name);
    return Eigen::Map<MatX>(grad.data() + s.offset, s.rows, s.cols);
  };
  const MatX& feat = cache.trunk.back();

  // color head
  MatX d_mu_pre = d_mu.cwiseProduct(cache.mu.cwiseProduct((1.0 - cache.mu.array()).matrix()));
  g("color_out_w").noalias() = d_mu_pre * cache.color_hidden.transpose();
  g("color_out_b") = d_mu_pre.rowwise().sum();
  MatX d_color_hidden = params.matrix("color_out_w").transpose() * d_mu_pre;
  d_color_hidden = d_color_hidden.cwiseProduct(
      (cache.color_hidden.array() > 0.0).cast<double>().matrix());
  g("color_hidden_w").noalias() = d_color_hidden * cache.color_in.transpose();
  g("color_hidden_b") = d_color_hidden.rowwise().sum();
  MatX d_feat =
      (params.matrix("color_hidden_w").transpose() * d_color_hidden).topRows(feat.rows());

  // uncertainty branch
  g("s_w").noalias() = d_s * cache.unc_hidden.transpose();
  g("s_b")(0, 0) = d_s.sum();
  MatX d_unc = params.matrix("s_w").transpose() * d_s;
  d_unc = d_unc.cwiseProduct((cache.unc_hidden.array() > 0.0).cast<double>().matrix());
  g("unc_w").noalias() = d_unc * feat.transpose();
  g("unc_b") = d_unc.rowwise().sum();
  d_feat.noalias() += params.matrix("unc_w").transpose() * d_unc;

  // density head; softplus'(pre) recovered from the output as 1 - exp(-rho)
  Eigen::RowVectorXd d_rho_pre =
      d_rho.cwiseProduct(cache.rho.unaryExpr([](double r) { return 1.0 - std::exp(-r); }));
  g("density_w").noalias() = d_rho_pre * feat.transpose();
  g("density_b")(0, 0) = d_rho_pre.sum();
  d_feat.noalias() += params.matrix("density_w").transpose() * d_rho_pre;

  // trunk
  MatX d_h = std::move(d_feat);
  for (int i = cfg.trunk_layers - 1; i >= 0; --i) {
    MatX d_a = d_h.cwiseProduct((cache.trunk[i].array() > 0.0).cast<double>().matrix());
    auto w = params.matrix("trunk_w" + std::to_string(i));
    if (i == 0) {
      g("trunk_w0").noalias() = d_a * cache.pe_x.transpose();
    } else if (i == cfg.skip_connection_layer) {
      auto gw = g("trunk_w" + std::to_string(i));
      gw.leftCols(cfg.trunk_width).noalias() = d_a * cache.trunk[i - 1].transpose();
      gw.rightCols(cache.pe_x.rows()).noalias() = d_a * cache.pe_x.transpose();
    } else {
      g("trunk_w" + std::to_string(i)).noalias() = d_a * cache.trunk[i - 1].transpose();
    }
    g("trunk_b" + std::to_string(i)) = d_a.rowwise().sum();
    if (i > 0) {
      if (i == cfg.skip_connection_layer)
        d_h.noalias() = w.leftCols(cfg.trunk_width).transpose() * d_a;
      else
        d_h.noalias() = w.transpose() * d_a;
    }
  }
  return grad;
}

// ---- Checkpoint I/O --------------------------------------------------------
//
// Versioned binary blob, little endian throughout:
//   bytes 0..7   magic "NRARCKPT"
//   u32          format version (1)
//   u32 x 6      config: pe_pos, pe_dir, trunk_layers, trunk_width,
//                branch_width, skip layer (0xFFFFFFFF = none)
//   u64          parameter count
//   f32 x count  flat parameter vector

namespace detail {

inline void put_u32_le(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

inline std::uint32_t get_u32_le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

inline void save_checkpoint(const FieldParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Fault("cannot write checkpoint: " + path);
  out.write("NRARCKPT", 8);
  const FieldConfig& c = params.config();
  detail::put_u32_le(out, 1);
  detail::put_u32_le(out, static_cast<std::uint32_t>(c.pe_frequencies_position));
  detail::put_u32_le(out, static_cast<std::uint32_t>(c.pe_frequencies_direction));
  detail::put_u32_le(out, static_cast<std::uint32_t>(c.trunk_layers));
  detail::put_u32_le(out, static_cast<std::uint32_t>(c.trunk_width));
  detail::put_u32_le(out, static_cast<std::uint32_t>(c.uncertainty_branch_width));
  detail::put_u32_le(out, c.skip_connection_layer < 0
                              ? 0xFFFFFFFFu
                              : static_cast<std::uint32_t>(c.skip_connection_layer));
  detail::put_u32_le(out, static_cast<std::uint32_t>(params.parameter_count() & 0xFFFFFFFF));
  detail::put_u32_le(out, static_cast<std::uint32_t>(params.parameter_count() >> 32));
  for (long i = 0; i < params.parameter_count(); ++i) {
    float f = static_cast<float>(params.values[i]);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    detail::put_u32_le(out, u);
  }
  if (!out) throw Fault("checkpoint write failed: " + path);
}

inline FieldParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Fault("cannot read checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "NRARCKPT", 8) != 0)
    throw Fault("checkpoint: bad magic in " + path);
  if (detail::get_u32_le(in) != 1) throw Fault("checkpoint: unsupported version");
  FieldConfig c;
  c.pe_frequencies_position = static_cast<int>(detail::get_u32_le(in));
  c.pe_frequencies_direction = static_cast<int>(detail::get_u32_le(in));
  c.trunk_layers = static_cast<int>(detail::get_u32_le(in));
  c.trunk_width = static_cast<int>(detail::get_u32_le(in));
  c.uncertainty_branch_width = static_cast<int>(detail::get_u32_le(in));
  std::uint32_t skip = detail::get_u32_le(in);
  c.skip_connection_layer = skip == 0xFFFFFFFFu ? -1 : static_cast<int>(skip);
  std::uint64_t count = detail::get_u32_le(in);
  count |= static_cast<std::uint64_t>(detail::get_u32_le(in)) << 32;
  FieldParams params(c);
  if (static_cast<std::uint64_t>(params.parameter_count()) != count)
    throw Fault("checkpoint: parameter count does not match config layout");
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint32_t u = detail::get_u32_le(in);
    float f;
    std::memcpy(&f, &u, 4);
    params.values[static_cast<long>(i)] = f;
  }
  if (!in) throw Fault("checkpoint: truncated file " + path);
  return params;
}

}  // namespace neurar
