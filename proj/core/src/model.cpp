#include "sparsecd/model.hpp"

#include <algorithm>

#include "sparsecd/errors.hpp"
#include "sparsecd/ops.hpp"

namespace sparsecd {

ModelConfig ModelConfig::full() {
  ModelConfig c;
  c.stage_depths = {3, 3, 9, 3};
  c.stage_channels = {64, 128, 320, 512};
  c.stage_heads = default_heads(c.stage_channels);
  c.gamma = 2;
  c.input_size = 512;
  c.decoder_dim = 256;
  return c;
}

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.stage_depths = {1, 1, 1, 1};
  c.stage_channels = {8, 16, 32, 64};
  c.stage_heads = default_heads(c.stage_channels);
  c.gamma = 2;
  c.input_size = 64;
  c.decoder_dim = 32;
  return c;
}

std::array<std::size_t, 4> ModelConfig::default_heads(const std::array<std::size_t, 4>& channels) {
  std::array<std::size_t, 4> h{};
  for (std::size_t i = 0; i < 4; ++i) h[i] = std::max<std::size_t>(1, channels[i] / 64);
  return h;
}

SSAConfig ModelConfig::ssa_config(std::size_t stage) const {
  SSAConfig s;
  s.gamma = gamma;
  s.offset_clip = effective_offset_clip();
  s.heads = stage_heads[stage];
  s.dim = stage_channels[stage];
  s.mlp_ratio = mlp_ratio;
  s.clip_mode = clip_mode;
  return s;
}

std::size_t ModelConfig::stage_size(std::size_t stage) const { return input_size >> (stage + 2); }

void ModelConfig::validate() const {
  if (!is_power_of_two(gamma)) throw ConfigError("gamma must be a power of two, got " + std::to_string(gamma));
  if (input_size == 0 || input_size % (32 * gamma) != 0) {
    throw GeometryError("input_size " + std::to_string(input_size) + " must be a positive multiple of 32*gamma = " +
                        std::to_string(32 * gamma));
  }
  if (num_classes != 2) throw ConfigError("num_classes must be 2");
  if (decoder_dim == 0) throw ConfigError("decoder_dim must be positive");
  if (ceff_reduction == 0) throw ConfigError("ceff_reduction must be positive");
  for (std::size_t i = 0; i < 4; ++i) {
    if (stage_channels[i] == 0) throw ConfigError("stage_channels must be positive");
    ssa_config(i).validate();
  }
}

namespace {

TensorF conv_weight(std::size_t out, std::size_t in, std::size_t k, Rng& rng) {
  return init::fan_in_uniform<float>(Shape{out, in, k, k}, in * k * k, rng);
}
TensorF zeros_param(std::size_t n) { return init::constant<float>(Shape{n}, 0.0f); }
TensorF ones_param(std::size_t n) { return init::constant<float>(Shape{n}, 1.0f); }

}  // namespace

ChangeDetector::ChangeDetector(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(mix_seed(seed, 0x6d6f64656c));
  const std::size_t d = cfg_.decoder_dim;
  std::size_t in = 3;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t c = cfg_.stage_channels[i];
    StageParams<float> s;
    s.embed_weight = conv_weight(c, in, i == 0 ? 7 : 3, rng);
    s.embed_bias = zeros_param(c);
    s.embed_norm_weight = ones_param(c);
    s.embed_norm_bias = zeros_param(c);
    for (std::size_t j = 0; j < cfg_.stage_depths[i]; ++j) {
      s.layers.push_back(SSALayerParams<float>::init(cfg_.ssa_config(i), rng));
    }
    s.norm_weight = ones_param(c);
    s.norm_bias = zeros_param(c);
    stages_.push_back(std::move(s));
    in = c;
  }
  for (std::size_t i = 0; i < 4; ++i) {
    if (cfg_.fusion == FusionMode::ceff) {
      ceff_.push_back(CEFFParams<float>::init(cfg_.stage_channels[i], cfg_.ceff_reduction, rng));
    } else {
      diff_.push_back(DiffParams<float>::init(cfg_.stage_channels[i], cfg_.fusion, rng));
    }
  }
  for (std::size_t i = 0; i < 4; ++i) {
    decoder_.proj_weight[i] = init::fan_in_uniform<float>(Shape{d, cfg_.stage_channels[i]}, cfg_.stage_channels[i], rng);
    decoder_.proj_bias[i] = zeros_param(d);
  }
  decoder_.fuse_weight = conv_weight(d, 4 * d, 3, rng);
  decoder_.fuse_bias = zeros_param(d);
  decoder_.up_weight = init::fan_in_uniform<float>(Shape{d, d, 4, 4}, d * 4, rng);
  decoder_.up_bias = zeros_param(d);
  decoder_.head_weight = init::fan_in_uniform<float>(Shape{cfg_.num_classes, d}, d, rng);
  decoder_.head_bias = zeros_param(cfg_.num_classes);
}

std::vector<TensorF> ChangeDetector::encode(const TensorF& img) const {
  const std::size_t s = cfg_.input_size;
  if (img.rank() != 4 || img.size(1) != 3 || img.size(2) != s || img.size(3) != s) {
    throw GeometryError("encoder expects [B, 3, " + std::to_string(s) + ", " + std::to_string(s) + "], got " +
                        shape_str(img.shape()));
  }
  std::vector<TensorF> feats;
  TensorF x = img;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& st = stages_[i];
    x = i == 0 ? ops::conv2d(x, st.embed_weight, st.embed_bias, 4, 3) : ops::conv2d(x, st.embed_weight, st.embed_bias, 2, 1);
    x = ops::layer_norm(x, 1, st.embed_norm_weight, st.embed_norm_bias);
    const SSAConfig sc = cfg_.ssa_config(i);
    for (const auto& layer : st.layers) x = ssa_layer(x, sc, layer);
    x = ops::layer_norm(x, 1, st.norm_weight, st.norm_bias);
    feats.push_back(x);
  }
  return feats;
}

std::vector<TensorF> ChangeDetector::fuse(const std::vector<TensorF>& pre, const std::vector<TensorF>& post) const {
  std::vector<TensorF> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out.push_back(cfg_.fusion == FusionMode::ceff ? ceff(pre[i], post[i], ceff_[i]).enhanced
                                                 : diff_fuse(pre[i], post[i], cfg_.fusion, diff_[i]));
  }
  return out;
}

TensorF ChangeDetector::decode(const std::vector<TensorF>& fused) const {
  const std::size_t h = fused[0].size(2), w = fused[0].size(3);
  std::vector<TensorF> maps;
  for (std::size_t i = 0; i < 4; ++i) {
    auto p = ops::conv1x1(fused[i], decoder_.proj_weight[i], decoder_.proj_bias[i]);
    if (i > 0) p = ops::resize_bilinear(p, h, w);
    maps.push_back(p);
  }
  auto x = ops::relu(ops::conv2d(ops::concat(maps, 1), decoder_.fuse_weight, decoder_.fuse_bias, 1, 1));
  x = ops::relu(ops::conv_transpose2d(x, decoder_.up_weight, decoder_.up_bias, 2, 1));
  x = ops::resize_bilinear(x, 4 * h, 4 * w);
  return ops::conv1x1(x, decoder_.head_weight, decoder_.head_bias);
}

TensorF ChangeDetector::forward(const TensorF& pre, const TensorF& post) const {
  if (pre.shape() != post.shape()) {
    throw DimensionError("pre/post shape mismatch " + shape_str(pre.shape()) + " vs " + shape_str(post.shape()));
  }
  return decode(fuse(encode(pre), encode(post)));
}

void ChangeDetector::collect_encoder(NamedTensors<float>& out) const {
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& st = stages_[i];
    const std::string p = "encoder.stage" + std::to_string(i + 1) + ".";
    out.emplace_back(p + "embed.weight", st.embed_weight);
    out.emplace_back(p + "embed.bias", st.embed_bias);
    out.emplace_back(p + "embed_norm.weight", st.embed_norm_weight);
    out.emplace_back(p + "embed_norm.bias", st.embed_norm_bias);
    for (std::size_t j = 0; j < st.layers.size(); ++j) {
      st.layers[j].collect(p + "layer" + std::to_string(j + 1) + ".", out);
    }
    out.emplace_back(p + "norm.weight", st.norm_weight);
    out.emplace_back(p + "norm.bias", st.norm_bias);
  }
}

NamedTensors<float> ChangeDetector::parameters() const {
  NamedTensors<float> out;
  collect_encoder(out);
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string p = "fusion.stage" + std::to_string(i + 1) + ".";
    if (cfg_.fusion == FusionMode::ceff) ceff_[i].collect(p, out);
    else diff_[i].collect(p, out);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string p = "decoder.proj" + std::to_string(i + 1) + ".";
    out.emplace_back(p + "weight", decoder_.proj_weight[i]);
    out.emplace_back(p + "bias", decoder_.proj_bias[i]);
  }
  out.emplace_back("decoder.fuse.weight", decoder_.fuse_weight);
  out.emplace_back("decoder.fuse.bias", decoder_.fuse_bias);
  out.emplace_back("decoder.up.weight", decoder_.up_weight);
  out.emplace_back("decoder.up.bias", decoder_.up_bias);
  out.emplace_back("decoder.head.weight", decoder_.head_weight);
  out.emplace_back("decoder.head.bias", decoder_.head_bias);
  return out;
}

namespace {
std::size_t count(const NamedTensors<float>& ts) {
  std::size_t n = 0;
  for (const auto& [name, t] : ts) n += t.numel();
  return n;
}
}  // namespace

std::size_t ChangeDetector::parameter_count() const { return count(parameters()); }

std::size_t ChangeDetector::encoder_parameter_count() const {
  NamedTensors<float> enc;
  collect_encoder(enc);
  return count(enc);
}

TensorF images_to_tensor(const std::vector<const Image*>& images, const InputNorm& norm) {
  if (images.empty()) throw DimensionError("images_to_tensor: empty batch");
  const auto& first = *images.front();
  if (first.channels != 3) throw DimensionError("images_to_tensor: expected 3 channels");
  const std::size_t plane = first.height * first.width;
  TensorF out(Shape{images.size(), 3, first.height, first.width});
  auto dst = out.data();
  for (std::size_t b = 0; b < images.size(); ++b) {
    const auto& img = *images[b];
    if (img.channels != 3 || img.height != first.height || img.width != first.width) {
      throw DimensionError("images_to_tensor: batch images differ in shape");
    }
    for (std::size_t c = 0; c < 3; ++c) {
      const float m = norm.mean[c], inv = 1.0f / norm.std[c];
      float* o = dst.data() + (b * 3 + c) * plane;
      const float* in = img.data.data() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) o[i] = (in[i] - m) * inv;
    }
  }
  return out;
}

namespace {

Image resize_image(const Image& img, std::size_t size) {
  if (img.height == size && img.width == size) return img;
  NoGradGuard guard;
  TensorF t(Shape{1, img.channels, img.height, img.width}, img.data);
  auto r = ops::resize_bilinear(t, size, size);
  Image out(img.channels, size, size);
  const auto d = r.data();
  std::copy(d.begin(), d.end(), out.data.begin());
  return out;
}

}  // namespace

ImagePair resize_pair(const ImagePair& pair, std::size_t size) {
  for (const Image* img : {&pair.pre, &pair.post}) {
    if (img->height != img->width) {
      throw GeometryError("resize_pair: non-square image " + std::to_string(img->height) + "x" +
                          std::to_string(img->width));
    }
  }
  return {resize_image(pair.pre, size), resize_image(pair.post, size)};
}

TensorF resize_logits(const TensorF& logits, std::size_t size) {
  if (logits.rank() != 4 || logits.size(2) != logits.size(3)) {
    throw GeometryError("resize_logits: expected square [B, K, S, S], got " + shape_str(logits.shape()));
  }
  if (logits.size(2) == size) return logits;
  return ops::resize_bilinear(logits, size, size);
}

TensorF predict_logits(const ChangeDetector& model, const std::vector<const ImagePair*>& pairs) {
  if (pairs.empty()) throw DimensionError("predict_logits: empty batch");
  const std::size_t s = model.config().input_size;
  const std::size_t native = pairs.front()->pre.height;
  std::vector<ImagePair> resized;
  resized.reserve(pairs.size());
  std::vector<const Image*> pre, post;
  for (const auto* p : pairs) {
    if (p->pre.height != native || p->post.height != native || p->pre.width != native || p->post.width != native) {
      throw GeometryError("predict_logits: batch pairs must share one square size");
    }
    if (native != s) {
      resized.push_back(resize_pair(*p, s));
    }
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const ImagePair& p = native != s ? resized[i] : *pairs[i];
    pre.push_back(&p.pre);
    post.push_back(&p.post);
  }
  const auto& norm = model.input_norm();
  auto logits = model.forward(images_to_tensor(pre, norm), images_to_tensor(post, norm));
  return resize_logits(logits, native);
}

std::vector<ChangeMask> predict_mask(const TensorF& logits) {
  if (logits.rank() != 4 || logits.size(1) != 2) {
    throw DimensionError("predict_mask: expected [B, 2, H, W] logits, got " + shape_str(logits.shape()));
  }
  const std::size_t b = logits.size(0), h = logits.size(2), w = logits.size(3), plane = h * w;
  const auto d = logits.data();
  std::vector<ChangeMask> masks;
  for (std::size_t n = 0; n < b; ++n) {
    ChangeMask m(h, w);
    const float* l0 = d.data() + n * 2 * plane;
    const float* l1 = l0 + plane;
    for (std::size_t i = 0; i < plane; ++i) m.values[i] = l1[i] > l0[i] ? 1 : 0;
    masks.push_back(std::move(m));
  }
  return masks;
}

}  // namespace sparsecd
