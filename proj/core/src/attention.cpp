#include "sparsecd/attention.hpp"

#include <cmath>

#include "sparsecd/ops.hpp"

namespace sparsecd {

namespace {
thread_local AttentionMacs* t_mac_sink = nullptr;
}

bool is_power_of_two(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

void SSAConfig::validate() const {
  if (!is_power_of_two(gamma)) {
    throw ConfigError("gamma must be a power of two, got " + std::to_string(gamma));
  }
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("dim " + std::to_string(dim) + " is not divisible by heads " + std::to_string(heads));
  }
  if (!(offset_clip >= 0.0)) throw ConfigError("offset_clip must be non-negative");
  if (mlp_ratio == 0) throw ConfigError("mlp_ratio must be positive");
}

ScopedMacCounter::ScopedMacCounter(AttentionMacs& sink) : previous_(t_mac_sink) { t_mac_sink = &sink; }
ScopedMacCounter::~ScopedMacCounter() { t_mac_sink = previous_; }

template <typename T>
Tensor<T> SparseSubsets<T>::subset(std::size_t k, std::size_t l) const {
  if (k >= gamma || l >= gamma) throw DimensionError("subset index outside the gamma x gamma lattice");
  auto one = ops::narrow(values, 1, k * gamma + l, 1);
  return ops::reshape(one, Shape{values.size(0), values.size(2), values.size(3), values.size(4)});
}

template <typename T>
SparseSubsets<T> SparseSubsets<T>::with_values(Tensor<T> attended) const {
  if (attended.shape() != values.shape()) {
    throw DimensionError("with_values: expected " + shape_str(values.shape()) + ", got " +
                         shape_str(attended.shape()));
  }
  SparseSubsets out = *this;
  out.values = std::move(attended);
  return out;
}

template <typename T>
OffsetParams<T> OffsetParams<T>::zeros(std::size_t dim) {
  return {init::constant<T>(Shape{2, dim, 3, 3}, T(0)), init::constant<T>(Shape{2}, T(0))};
}

template <typename T>
void OffsetParams<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  out.emplace_back(prefix + "weight", weight);
  out.emplace_back(prefix + "bias", bias);
}

template <typename T>
AttentionParams<T> AttentionParams<T>::init(std::size_t dim, Rng& rng) {
  AttentionParams p;
  auto proj = [&](Tensor<T>& w, Tensor<T>& b) {
    w = init::fan_in_uniform<T>(Shape{dim, dim}, dim, rng);
    b = init::constant<T>(Shape{dim}, T(0));
  };
  proj(p.q_weight, p.q_bias);
  proj(p.k_weight, p.k_bias);
  proj(p.v_weight, p.v_bias);
  proj(p.o_weight, p.o_bias);
  return p;
}

template <typename T>
void AttentionParams<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  out.emplace_back(prefix + "q.weight", q_weight);
  out.emplace_back(prefix + "q.bias", q_bias);
  out.emplace_back(prefix + "k.weight", k_weight);
  out.emplace_back(prefix + "k.bias", k_bias);
  out.emplace_back(prefix + "v.weight", v_weight);
  out.emplace_back(prefix + "v.bias", v_bias);
  out.emplace_back(prefix + "o.weight", o_weight);
  out.emplace_back(prefix + "o.bias", o_bias);
}

template <typename T>
SSAParams<T> SSAParams<T>::init(const SSAConfig& cfg, Rng& rng) {
  return {OffsetParams<T>::zeros(cfg.dim), AttentionParams<T>::init(cfg.dim, rng)};
}

template <typename T>
void SSAParams<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  offset.collect(prefix + "offset.", out);
  attention.collect(prefix + "attn.", out);
}

template <typename T>
SSALayerParams<T> SSALayerParams<T>::init(const SSAConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t hidden = cfg.dim * cfg.mlp_ratio;
  SSALayerParams p;
  p.norm1_weight = init::constant<T>(Shape{cfg.dim}, T(1));
  p.norm1_bias = init::constant<T>(Shape{cfg.dim}, T(0));
  p.ssa = SSAParams<T>::init(cfg, rng);
  p.norm2_weight = init::constant<T>(Shape{cfg.dim}, T(1));
  p.norm2_bias = init::constant<T>(Shape{cfg.dim}, T(0));
  p.fc1_weight = init::fan_in_uniform<T>(Shape{hidden, cfg.dim}, cfg.dim, rng);
  p.fc1_bias = init::constant<T>(Shape{hidden}, T(0));
  p.fc2_weight = init::fan_in_uniform<T>(Shape{cfg.dim, hidden}, hidden, rng);
  p.fc2_bias = init::constant<T>(Shape{cfg.dim}, T(0));
  return p;
}

template <typename T>
void SSALayerParams<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  out.emplace_back(prefix + "norm1.weight", norm1_weight);
  out.emplace_back(prefix + "norm1.bias", norm1_bias);
  ssa.collect(prefix + "ssa.", out);
  out.emplace_back(prefix + "norm2.weight", norm2_weight);
  out.emplace_back(prefix + "norm2.bias", norm2_bias);
  out.emplace_back(prefix + "mlp.fc1.weight", fc1_weight);
  out.emplace_back(prefix + "mlp.fc1.bias", fc1_bias);
  out.emplace_back(prefix + "mlp.fc2.weight", fc2_weight);
  out.emplace_back(prefix + "mlp.fc2.bias", fc2_bias);
}

template <typename T>
OffsetField<T> predict_offsets(const Tensor<T>& f, const OffsetParams<T>& params, double clip, ClipMode mode) {
  if (f.rank() != 4) throw DimensionError("predict_offsets: expected [B, C, H, W], got " + shape_str(f.shape()));
  if (!(clip >= 0.0)) throw ConfigError("offset clip must be non-negative");
  auto raw = ops::conv2d(f, params.weight, params.bias, 1, 1);
  if (clip == 0.0) return {ops::mul_scalar(raw, T(0)), clip};
  const T c = static_cast<T>(clip);
  if (mode == ClipMode::hard) return {ops::clamp(raw, -c, c), clip};
  return {ops::mul_scalar(ops::tanh(ops::mul_scalar(raw, T(1) / c)), c), clip};
}

template <typename T>
SparseSubsets<T> sparse_shuffle(const Tensor<T>& f, const OffsetField<T>& offsets, std::size_t gamma) {
  if (f.rank() != 4) throw DimensionError("sparse_shuffle: expected [B, C, H, W], got " + shape_str(f.shape()));
  if (!is_power_of_two(gamma)) throw GeometryError("sparse_shuffle: gamma must be a power of two");
  const std::size_t batch = f.size(0), ch = f.size(1), height = f.size(2), width = f.size(3);
  if (height % gamma != 0 || width % gamma != 0) {
    throw GeometryError("sparse_shuffle: " + std::to_string(height) + "x" + std::to_string(width) +
                        " is not divisible by gamma " + std::to_string(gamma));
  }
  if (offsets.values.shape() != Shape{batch, 2, height, width}) {
    throw DimensionError("sparse_shuffle: offsets " + shape_str(offsets.values.shape()) +
                         " do not match features " + shape_str(f.shape()));
  }
  const std::size_t h = height / gamma, w = width / gamma, subsets = gamma * gamma;

  // Offsets read at each lattice slot, arranged as [B, k, l, i, j, 2].
  auto off = ops::reshape(offsets.values, Shape{batch, 2, h, gamma, w, gamma});
  off = ops::permute(off, {0, 3, 5, 2, 4, 1});
  off = ops::reshape(off, Shape{batch, subsets * h, w, 2});

  Tensor<T> lattice(Shape{batch, subsets * h, w, 2});
  auto lv = lattice.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < gamma; ++k) {
      for (std::size_t l = 0; l < gamma; ++l) {
        for (std::size_t i = 0; i < h; ++i) {
          for (std::size_t j = 0; j < w; ++j) {
            const std::size_t row = (k * gamma + l) * h + i;
            const std::size_t at = ((b * subsets * h + row) * w + j) * 2;
            lv[at] = static_cast<T>(gamma * i + k);
            lv[at + 1] = static_cast<T>(gamma * j + l);
          }
        }
      }
    }
  }
  auto coords = ops::add(off, lattice);
  auto sampled = ops::bilinear_sample(f, coords);  // [B, C, subsets*h, w]
  sampled = ops::reshape(sampled, Shape{batch, ch, subsets, h, w});
  sampled = ops::permute(sampled, {0, 2, 1, 3, 4});
  return {sampled, coords, gamma};
}

template <typename T>
Tensor<T> unshuffle(const SparseSubsets<T>& subsets) {
  const auto& v = subsets.values;
  const std::size_t g = subsets.gamma;
  if (v.rank() != 5 || v.size(1) != g * g) {
    throw DimensionError("unshuffle: expected [B, gamma^2, C, h, w], got " + shape_str(v.shape()));
  }
  const std::size_t batch = v.size(0), ch = v.size(2), h = v.size(3), w = v.size(4);
  auto x = ops::reshape(v, Shape{batch, g, g, ch, h, w});
  x = ops::permute(x, {0, 3, 4, 1, 5, 2});
  return ops::reshape(x, Shape{batch, ch, h * g, w * g});
}

template <typename T>
Tensor<T> dense_attention(const Tensor<T>& x, const AttentionParams<T>& params, std::size_t heads,
                          Tensor<T>* weights) {
  if (x.rank() == 4) {
    const std::size_t b = x.size(0), c = x.size(1), hh = x.size(2), ww = x.size(3);
    auto tokens = ops::reshape(x, Shape{b, c, hh * ww});
    return ops::reshape(dense_attention(tokens, params, heads, weights), x.shape());
  }
  if (x.rank() != 3) {
    throw DimensionError("dense_attention: expected [B, C, H, W] or [G, C, N], got " + shape_str(x.shape()));
  }
  const std::size_t groups = x.size(0), dim = x.size(1), n = x.size(2);
  if (heads == 0 || dim % heads != 0) {
    throw DimensionError("dense_attention: channels " + std::to_string(dim) + " not divisible by heads " +
                         std::to_string(heads));
  }
  if (params.q_weight.shape() != Shape{dim, dim}) {
    throw DimensionError("dense_attention: projection " + shape_str(params.q_weight.shape()) +
                         " does not match " + std::to_string(dim) + " channels");
  }
  const std::size_t head_dim = dim / heads;
  const std::size_t gh = groups * heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(head_dim));

  auto q = ops::mul_scalar(ops::conv1x1(x, params.q_weight, params.q_bias), scale);
  auto k = ops::conv1x1(x, params.k_weight, params.k_bias);
  auto v = ops::conv1x1(x, params.v_weight, params.v_bias);
  q = ops::reshape(q, Shape{gh, head_dim, n});
  k = ops::reshape(k, Shape{gh, head_dim, n});
  v = ops::reshape(v, Shape{gh, head_dim, n});

  auto probs = ops::softmax(ops::bmm(q, k, true, false), 2);  // [gh, n, n]
  auto mixed = ops::bmm(probs, v, false, true);                // [gh, n, head_dim]
  if (t_mac_sink) {
    const auto macs = static_cast<std::uint64_t>(gh) * n * n * head_dim;
    t_mac_sink->score += macs;
    t_mac_sink->value += macs;
  }
  if (weights) *weights = probs;
  mixed = ops::reshape(ops::permute(mixed, {0, 2, 1}), Shape{groups, dim, n});
  return ops::conv1x1(mixed, params.o_weight, params.o_bias);
}

template <typename T>
Tensor<T> ssa_forward(const Tensor<T>& f, const SSAConfig& cfg, const SSAParams<T>& params) {
  cfg.validate();
  const auto offsets = predict_offsets(f, params.offset, cfg.offset_clip, cfg.clip_mode);
  auto subsets = sparse_shuffle(f, offsets, cfg.gamma);
  const auto& s = subsets.values.shape();  // [B, g2, C, h, w]
  auto tokens = ops::reshape(subsets.values, Shape{s[0] * s[1], s[2], s[3] * s[4]});
  auto attended = dense_attention(tokens, params.attention, cfg.heads);
  return unshuffle(subsets.with_values(ops::reshape(attended, s)));
}

template <typename T>
Tensor<T> ssa_layer(const Tensor<T>& f, const SSAConfig& cfg, const SSALayerParams<T>& params) {
  auto x = ops::add(f, ssa_forward(ops::layer_norm(f, 1, params.norm1_weight, params.norm1_bias), cfg, params.ssa));
  auto y = ops::layer_norm(x, 1, params.norm2_weight, params.norm2_bias);
  auto hidden = ops::gelu(ops::conv1x1(y, params.fc1_weight, params.fc1_bias));
  return ops::add(x, ops::conv1x1(hidden, params.fc2_weight, params.fc2_bias));
}

#define INSTANTIATE(T)                                                                                \
  template struct SparseSubsets<T>;                                                                    \
  template struct OffsetParams<T>;                                                                     \
  template struct AttentionParams<T>;                                                                  \
  template struct SSAParams<T>;                                                                        \
  template struct SSALayerParams<T>;                                                                   \
  template OffsetField<T> predict_offsets(const Tensor<T>&, const OffsetParams<T>&, double, ClipMode); \
  template SparseSubsets<T> sparse_shuffle(const Tensor<T>&, const OffsetField<T>&, std::size_t);      \
  template Tensor<T> unshuffle(const SparseSubsets<T>&);                                               \
  template Tensor<T> dense_attention(const Tensor<T>&, const AttentionParams<T>&, std::size_t, Tensor<T>*); \
  template Tensor<T> ssa_forward(const Tensor<T>&, const SSAConfig&, const SSAParams<T>&);            \
  template Tensor<T> ssa_layer(const Tensor<T>&, const SSAConfig&, const SSALayerParams<T>&);
INSTANTIATE(float)
INSTANTIATE(double)
#undef INSTANTIATE

}  // namespace sparsecd
