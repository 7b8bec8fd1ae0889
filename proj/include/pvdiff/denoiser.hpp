#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pvdiff/error.hpp"
#include "pvdiff/grid.hpp"
#include "pvdiff/nn.hpp"
#include "pvdiff/patching.hpp"
#include "pvdiff/tensor.hpp"

namespace pvdiff {

/// Noise-prediction U-Net hyperparameters. Level l of the U-Net carries
/// base_channels * 2^l channels at side image_side / 2^l.
struct DenoiserConfig {
  int image_side = 16;
  int in_channels = 2;  // noisy image + mask
  int base_channels = 32;
  int depth = 3;
  int time_embed_dim = 64;
  int norm_groups = 8;

  void validate() const {
    require(in_channels == 2, "denoiser: in_channels must be 2 (image + mask)");
    require(depth >= 1, "denoiser: depth must be >= 1");
    require(image_side > 0 && image_side % (1 << depth) == 0,
            "denoiser: image_side " + std::to_string(image_side) + " not divisible by 2^depth");
    require(norm_groups >= 1 && base_channels % norm_groups == 0,
            "denoiser: base_channels must be divisible by norm_groups");
    require(time_embed_dim >= 2 && time_embed_dim % 2 == 0, "denoiser: time_embed_dim must be even");
  }

  bool operator==(const DenoiserConfig&) const = default;
};

/// Entry 2k is sin(t / 10000^(2k/dim)), entry 2k+1 the matching cosine.
inline std::vector<double> sinusoidal_time_embedding(double t, int dim) {
  if (dim <= 0 || dim % 2 != 0) throw ConfigError("time embedding dimension must be positive and even");
  std::vector<double> e(static_cast<std::size_t>(dim));
  for (int k = 0; k < dim / 2; ++k) {
    const double freq = std::pow(10000.0, -2.0 * k / dim);
    e[static_cast<std::size_t>(2 * k)] = std::sin(t * freq);
    e[static_cast<std::size_t>(2 * k + 1)] = std::cos(t * freq);
  }
  return e;
}

/// Weights of the noise predictor, keyed by layer name.
using DenoiserParams = ParamSet<float>;

namespace detail {

struct ResBlock {
  nn::GroupNorm norm1;
  nn::Conv2d conv1;
  nn::Dense temb;
  nn::GroupNorm norm2;
  nn::Conv2d conv2;
  bool has_skip = false;
  nn::Conv2d skip;
  int cin = 0;
  int cout = 0;

  template <typename S>
  struct Cache {
    Tensor<S> x;
    nn::GroupNorm::Cache<S> n1;
    Tensor<S> g1, a1;
    nn::GroupNorm::Cache<S> n2;
    Tensor<S> g2, a2;
  };

  template <typename S>
  Tensor<S> forward(const ParamSet<S>& p, const Tensor<S>& x, const nn::RowMat<S>& tact, Cache<S>& c) const {
    c.x = x;
    c.g1 = norm1.forward(p, x, c.n1);
    c.a1 = nn::silu(c.g1);
    Tensor<S> h = conv1.forward(p, c.a1);
    const nn::RowMat<S> proj = temb.forward(p, tact);
    for (int ch = 0; ch < h.c; ++ch) {
      for (int ni = 0; ni < h.n; ++ni) {
        S* dst = h.ptr(ch, ni);
        const S add = proj(ch, ni);
        for (std::size_t i = 0; i < h.plane(); ++i) dst[i] += add;
      }
    }
    c.g2 = norm2.forward(p, h, c.n2);
    c.a2 = nn::silu(c.g2);
    Tensor<S> y = conv2.forward(p, c.a2);
    if (has_skip) {
      nn::add_inplace(y, skip.forward(p, x));
    } else {
      nn::add_inplace(y, x);
    }
    return y;
  }

  template <typename S>
  Tensor<S> backward(const ParamSet<S>& p, const Cache<S>& c, const Tensor<S>& dy, const nn::RowMat<S>& tact,
                     nn::RowMat<S>& d_tact, ParamSet<S>& g) const {
    Tensor<S> d_a2 = conv2.backward(p, c.a2, dy, g);
    Tensor<S> d_h = norm2.backward(p, c.n2, nn::silu_backward(c.g2, d_a2), g);
    nn::RowMat<S> d_proj(d_h.c, d_h.n);
    for (int ch = 0; ch < d_h.c; ++ch) {
      for (int ni = 0; ni < d_h.n; ++ni) {
        const S* src = d_h.ptr(ch, ni);
        double acc = 0.0;
        for (std::size_t i = 0; i < d_h.plane(); ++i) acc += src[i];
        d_proj(ch, ni) = static_cast<S>(acc);
      }
    }
    d_tact += temb.backward(p, tact, d_proj, g);
    Tensor<S> d_a1 = conv1.backward(p, c.a1, d_h, g);
    Tensor<S> dx = norm1.backward(p, c.n1, nn::silu_backward(c.g1, d_a1), g);
    if (has_skip) {
      nn::add_inplace(dx, skip.backward(p, c.x, dy, g));
    } else {
      nn::add_inplace(dx, dy);
    }
    return dx;
  }
};

}  // namespace detail

/// Forward intermediates needed by the backward pass.
template <typename S>
struct UNetTape {
  Tensor<S> input;
  nn::RowMat<S> embed, u1, s1, temb, tact;
  Tensor<S> h0;
  std::vector<detail::ResBlock::Cache<S>> down, up;
  detail::ResBlock::Cache<S> mid;
  std::vector<int> up_channels;  // channels of the upsampled half of each up-block input
  nn::GroupNorm::Cache<S> norm_out;
  Tensor<S> g_out, a_out;
};

/// Layer layout of the noise predictor. The layout is a pure function of the
/// config, so any parameter set created by `init_params` for the same config
/// lines up with it.
template <typename S>
class UNet {
 public:
  explicit UNet(const DenoiserConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    build(layout_);
  }

  const DenoiserConfig& config() const { return cfg_; }

  int channels_at(int level) const { return cfg_.base_channels << level; }

  /// Deterministic fan-in scaled uniform initialization. With zero_head the
  /// output convolution starts at zero, so the untrained network predicts 0.
  ParamSet<S> init_params(std::uint64_t seed, bool zero_head = true) const {
    ParamSet<S> p = layout_;
    std::mt19937_64 engine(seed);
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto& e = p[i];
      const std::string& n = e.name;
      const bool is_weight = n.size() > 7 && n.compare(n.size() - 7, 7, ".weight") == 0;
      if (n.ends_with(".gamma")) {
        std::fill(e.data.begin(), e.data.end(), S{1});
      } else if (is_weight && !(zero_head && n.starts_with("conv_out."))) {
        int fan_in = 1;
        for (std::size_t d = 1; d < e.shape.size(); ++d) fan_in *= e.shape[d];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (auto& x : e.data) x = static_cast<S>(u(engine));
      }
    }
    return p;
  }

  /// Predicts noise for a batch. `input` is [2, B, S, S]; steps has B entries.
  Tensor<S> forward(const ParamSet<S>& p, const Tensor<S>& input, std::span<const int> steps,
                    UNetTape<S>* tape = nullptr) const {
    check_layout(p);
    const int side = cfg_.image_side;
    const int batch = input.n;
    expect_shape(input, cfg_.in_channels, batch, side, side, "unet input");
    if (static_cast<int>(steps.size()) != batch) throw std::logic_error("unet: one step per batch element required");
    UNetTape<S> local;
    UNetTape<S>& tp = tape ? *tape : local;
    tp.input = input;

    const int dim = cfg_.time_embed_dim;
    tp.embed = nn::RowMat<S>(dim, batch);
    for (int b = 0; b < batch; ++b) {
      const auto e = sinusoidal_time_embedding(steps[static_cast<std::size_t>(b)], dim);
      for (int k = 0; k < dim; ++k) tp.embed(k, b) = static_cast<S>(e[static_cast<std::size_t>(k)]);
    }
    tp.u1 = time_fc1_.forward(p, tp.embed);
    tp.s1 = nn::silu(tp.u1);
    tp.temb = time_fc2_.forward(p, tp.s1);
    tp.tact = nn::silu(tp.temb);

    Tensor<S> h = conv_in_.forward(p, input);
    expect_shape(h, channels_at(0), batch, side, side, "conv_in");
    tp.down.resize(static_cast<std::size_t>(cfg_.depth));
    tp.up.resize(static_cast<std::size_t>(cfg_.depth));
    tp.up_channels.assign(static_cast<std::size_t>(cfg_.depth), 0);
    std::vector<Tensor<S>> skips(static_cast<std::size_t>(cfg_.depth));
    for (int l = 0; l < cfg_.depth; ++l) {
      const auto li = static_cast<std::size_t>(l);
      h = down_[li].forward(p, h, tp.tact, tp.down[li]);
      expect_shape(h, channels_at(l), batch, side >> l, side >> l, "down block");
      skips[li] = h;
      h = nn::avg_pool2(h);
      expect_shape(h, channels_at(l), batch, side >> (l + 1), side >> (l + 1), "downsample");
    }
    h = mid_.forward(p, h, tp.tact, tp.mid);
    for (int l = cfg_.depth - 1; l >= 0; --l) {
      const auto li = static_cast<std::size_t>(l);
      Tensor<S> u = nn::upsample2(h);
      expect_shape(u, h.c, batch, side >> l, side >> l, "upsample");
      expect_shape(skips[li], channels_at(l), batch, side >> l, side >> l, "skip");
      tp.up_channels[li] = u.c;
      h = up_[li].forward(p, nn::concat(u, skips[li]), tp.tact, tp.up[li]);
      expect_shape(h, channels_at(l), batch, side >> l, side >> l, "up block");
    }
    tp.g_out = norm_out_.forward(p, h, tp.norm_out);
    tp.a_out = nn::silu(tp.g_out);
    Tensor<S> y = conv_out_.forward(p, tp.a_out);
    expect_shape(y, 1, batch, side, side, "conv_out");
    return y;
  }

  /// Accumulates dL/dparams into `grads` given dL/d(output).
  void backward(const ParamSet<S>& p, const UNetTape<S>& tp, const Tensor<S>& d_out, ParamSet<S>& grads) const {
    check_layout(p);
    const int batch = tp.input.n;
    nn::RowMat<S> d_tact = nn::RowMat<S>::Zero(cfg_.time_embed_dim, batch);
    Tensor<S> d_h = conv_out_.backward(p, tp.a_out, d_out, grads);
    d_h = norm_out_.backward(p, tp.norm_out, nn::silu_backward(tp.g_out, d_h), grads);
    std::vector<Tensor<S>> d_skips(static_cast<std::size_t>(cfg_.depth));
    for (int l = 0; l < cfg_.depth; ++l) {
      const auto li = static_cast<std::size_t>(l);
      Tensor<S> d_cat = up_[li].backward(p, tp.up[li], d_h, tp.tact, d_tact, grads);
      auto [d_u, d_skip] = nn::split_channels(d_cat, tp.up_channels[li]);
      d_skips[li] = std::move(d_skip);
      d_h = nn::upsample2_backward(d_u);
    }
    d_h = mid_.backward(p, tp.mid, d_h, tp.tact, d_tact, grads);
    for (int l = cfg_.depth - 1; l >= 0; --l) {
      const auto li = static_cast<std::size_t>(l);
      d_h = nn::avg_pool2_backward(d_h);
      nn::add_inplace(d_h, d_skips[li]);
      d_h = down_[li].backward(p, tp.down[li], d_h, tp.tact, d_tact, grads);
    }
    conv_in_.backward(p, tp.input, d_h, grads);
    const nn::RowMat<S> d_temb = nn::silu_backward(tp.temb, d_tact);
    const nn::RowMat<S> d_s1 = time_fc2_.backward(p, tp.s1, d_temb, grads);
    time_fc1_.backward(p, tp.embed, nn::silu_backward(tp.u1, d_s1), grads);
  }

  /// Throws ConfigError unless `p` has this network's names and shapes in registration order.
  void check_layout(const ParamSet<S>& p) const {
    if (p.size() != layout_.size()) throw ConfigError("denoiser parameters do not match the config");
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i].name != layout_[i].name || p[i].shape != layout_[i].shape) {
        throw ConfigError("denoiser parameter '" + p[i].name + "' does not match the config");
      }
    }
  }

 private:
  /// Zero-filled parameter set with the canonical names and shapes.
  const ParamSet<S>& layout() const { return layout_; }

  static nn::Conv2d add_conv(ParamSet<S>& p, const std::string& name, int cin, int cout, int k) {
    nn::Conv2d c;
    c.cin = cin;
    c.cout = cout;
    c.k = k;
    c.weight = p.add(name + ".weight", {cout, cin, k, k});
    c.bias = p.add(name + ".bias", {cout});
    return c;
  }

  nn::GroupNorm add_norm(ParamSet<S>& p, const std::string& name, int ch) const {
    nn::GroupNorm g;
    g.channels = ch;
    g.groups = cfg_.norm_groups;
    g.gamma = p.add(name + ".gamma", {ch});
    g.beta = p.add(name + ".beta", {ch});
    return g;
  }

  static nn::Dense add_dense(ParamSet<S>& p, const std::string& name, int in, int out) {
    nn::Dense d;
    d.in = in;
    d.out = out;
    d.weight = p.add(name + ".weight", {out, in});
    d.bias = p.add(name + ".bias", {out});
    return d;
  }

  detail::ResBlock add_block(ParamSet<S>& p, const std::string& name, int cin, int cout) const {
    detail::ResBlock b;
    b.cin = cin;
    b.cout = cout;
    b.norm1 = add_norm(p, name + ".norm1", cin);
    b.conv1 = add_conv(p, name + ".conv1", cin, cout, 3);
    b.temb = add_dense(p, name + ".temb", cfg_.time_embed_dim, cout);
    b.norm2 = add_norm(p, name + ".norm2", cout);
    b.conv2 = add_conv(p, name + ".conv2", cout, cout, 3);
    b.has_skip = cin != cout;
    if (b.has_skip) b.skip = add_conv(p, name + ".skip", cin, cout, 1);
    return b;
  }

  void build(ParamSet<S>& p) {
    auto& self = *this;
    const int dim = cfg_.time_embed_dim;
    self.time_fc1_ = add_dense(p, "time.fc1", dim, dim);
    self.time_fc2_ = add_dense(p, "time.fc2", dim, dim);
    self.conv_in_ = add_conv(p, "conv_in", cfg_.in_channels, channels_at(0), 3);
    self.down_.clear();
    int ch = channels_at(0);
    for (int l = 0; l < cfg_.depth; ++l) {
      self.down_.push_back(add_block(p, "down" + std::to_string(l), ch, channels_at(l)));
      ch = channels_at(l);
    }
    self.mid_ = add_block(p, "mid", ch, ch);
    self.up_.assign(static_cast<std::size_t>(cfg_.depth), {});
    for (int l = cfg_.depth - 1; l >= 0; --l) {
      self.up_[static_cast<std::size_t>(l)] =
          add_block(p, "up" + std::to_string(l), ch + channels_at(l), channels_at(l));
      ch = channels_at(l);
    }
    self.norm_out_ = add_norm(p, "norm_out", ch);
    self.conv_out_ = add_conv(p, "conv_out", ch, 1, 3);
  }

  DenoiserConfig cfg_;
  ParamSet<S> layout_;
  nn::Dense time_fc1_, time_fc2_;
  nn::Conv2d conv_in_, conv_out_;
  std::vector<detail::ResBlock> down_, up_;
  detail::ResBlock mid_;
  nn::GroupNorm norm_out_;
};

template <typename S = float>
ParamSet<S> init_params(const DenoiserConfig& cfg, std::uint64_t seed, bool zero_head = true) {
  return UNet<S>(cfg).init_params(seed, zero_head);
}

/// Packs B images and their masks into the [2, B, S, S] network input.
template <typename S>
Tensor<S> make_input(std::span<const Grid<S>> images, std::span<const Mask> masks) {
  if (images.empty() || images.size() != masks.size()) throw ConfigError("make_input: need one mask per image");
  const int side = static_cast<int>(images.front().rows);
  const int batch = static_cast<int>(images.size());
  Tensor<S> in(2, batch, side, side);
  for (int b = 0; b < batch; ++b) {
    const auto& img = images[static_cast<std::size_t>(b)];
    const auto& m = masks[static_cast<std::size_t>(b)];
    if (img.rows != static_cast<std::size_t>(side) || img.cols != static_cast<std::size_t>(side) ||
        m.side() != static_cast<std::size_t>(side)) {
      throw ConfigError("make_input: image/mask shape mismatch");
    }
    for (std::size_t i = 0; i < img.size(); ++i) {
      if (!std::isfinite(static_cast<double>(img.data[i]))) throw NumericalError("denoiser input is not finite");
      in.ptr(0, b)[i] = img.data[i];
      in.ptr(1, b)[i] = static_cast<S>(m.cells.data[i]);
    }
  }
  return in;
}

/// Single-image noise prediction.
template <typename S>
Grid<S> predict_noise(const ParamSet<S>& params, const DenoiserConfig& cfg, const Grid<S>& x_t, const Mask& mask,
                      int t) {
  if (t < 1) throw ConfigError("predict_noise: step must be >= 1");
  if (x_t.rows != static_cast<std::size_t>(cfg.image_side) || x_t.cols != x_t.rows) {
    throw ConfigError("predict_noise: image side does not match the denoiser config");
  }
  const UNet<S> net(cfg);
  const Tensor<S> in = make_input<S>(std::span<const Grid<S>>(&x_t, 1), std::span<const Mask>(&mask, 1));
  const int steps[1] = {t};
  Tensor<S> out = net.forward(params, in, steps);
  Grid<S> result(x_t.rows, x_t.cols);
  std::copy(out.v.begin(), out.v.end(), result.data.begin());
  return result;
}

/// One supervised pair: noisy image, its mask, its step, and the injected noise.
template <typename S>
struct DenoisingExample {
  Grid<S> x_t;
  Mask mask;
  int t = 1;
  Grid<S> noise;
};

template <typename S>
struct MaskedLoss {
  double loss = 0.0;
  Tensor<S> d_pred;  // dL/d(prediction), zero wherever M = 0
  std::size_t masked_cells = 0;
};

/// Mean squared error over cells with M = 1 only, across the whole batch.
/// Cells with M = 0 are never read from `pred`.
template <typename S>
MaskedLoss<S> masked_mse(const Tensor<S>& pred, std::span<const DenoisingExample<S>> batch) {
  if (batch.empty()) throw ConfigError("masked loss: empty batch");
  MaskedLoss<S> out;
  for (const auto& ex : batch) out.masked_cells += ex.mask.sum();
  if (out.masked_cells == 0) throw ConfigError("masked loss: mask selects no cells");
  out.d_pred = Tensor<S>(pred.c, pred.n, pred.h, pred.w);
  const double inv = 1.0 / static_cast<double>(out.masked_cells);
  double acc = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& ex = batch[b];
    const S* p = pred.ptr(0, static_cast<int>(b));
    S* d = out.d_pred.ptr(0, static_cast<int>(b));
    for (std::size_t i = 0; i < ex.noise.size(); ++i) {
      if (!ex.mask.cells.data[i]) continue;
      const double r = static_cast<double>(p[i]) - static_cast<double>(ex.noise.data[i]);
      acc += r * r;
      d[i] = static_cast<S>(2.0 * r * inv);
    }
  }
  out.loss = acc * inv;
  return out;
}

template <typename S>
struct LossAndGrad {
  double loss = 0.0;
  ParamSet<S> grads;
};

/// Masked denoising loss and its exact gradient with respect to every parameter.
template <typename S>
LossAndGrad<S> loss_and_grad(const UNet<S>& net, const ParamSet<S>& params,
                             std::span<const DenoisingExample<S>> batch) {
  if (batch.empty()) throw ConfigError("loss_and_grad: empty batch");
  std::vector<Grid<S>> images;
  std::vector<Mask> masks;
  std::vector<int> steps;
  images.reserve(batch.size());
  for (const auto& ex : batch) {
    images.push_back(ex.x_t);
    masks.push_back(ex.mask);
    steps.push_back(ex.t);
    if (ex.noise.size() != ex.x_t.size()) throw ConfigError("loss_and_grad: noise/image shape mismatch");
  }
  UNetTape<S> tape;
  const Tensor<S> pred = net.forward(params, make_input<S>(images, masks), steps, &tape);
  MaskedLoss<S> ml = masked_mse<S>(pred, batch);
  LossAndGrad<S> out{ml.loss, params.zeros_like()};
  net.backward(params, tape, ml.d_pred, out.grads);
  return out;
}

}  // namespace pvdiff
