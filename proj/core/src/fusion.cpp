#include "sparsecd/fusion.hpp"

#include <algorithm>

#include "sparsecd/ops.hpp"

namespace sparsecd {

template <typename T>
CEFFParams<T> CEFFParams<T>::init(std::size_t channels, std::size_t reduction, Rng& rng) {
  if (reduction == 0) throw ConfigError("CEFF reduction ratio must be positive");
  const std::size_t reduced = std::max<std::size_t>(1, channels / reduction);
  CEFFParams p;
  p.reduce_weight = init::fan_in_uniform<T>(Shape{reduced, channels}, channels, rng);
  p.reduce_bias = init::constant<T>(Shape{reduced}, T(0));
  // Separate draws: tied branches would keep both weights at 0.5.
  p.pre_weight = init::fan_in_uniform<T>(Shape{channels, reduced}, reduced, rng);
  p.pre_bias = init::constant<T>(Shape{channels}, T(0));
  p.post_weight = init::fan_in_uniform<T>(Shape{channels, reduced}, reduced, rng);
  p.post_bias = init::constant<T>(Shape{channels}, T(0));
  return p;
}

template <typename T>
void CEFFParams<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  out.emplace_back(prefix + "reduce.weight", reduce_weight);
  out.emplace_back(prefix + "reduce.bias", reduce_bias);
  out.emplace_back(prefix + "pre.weight", pre_weight);
  out.emplace_back(prefix + "pre.bias", pre_bias);
  out.emplace_back(prefix + "post.weight", post_weight);
  out.emplace_back(prefix + "post.bias", post_bias);
}

template <typename T>
CEFFResult<T> ceff(const Tensor<T>& f_pre, const Tensor<T>& f_post, const CEFFParams<T>& params) {
  if (f_pre.rank() != 4 || f_pre.shape() != f_post.shape()) {
    throw DimensionError("ceff: stream shapes differ: " + shape_str(f_pre.shape()) + " vs " +
                         shape_str(f_post.shape()));
  }
  const std::size_t batch = f_pre.size(0), channels = f_pre.size(1);
  if (params.pre_weight.size(0) != channels) {
    throw DimensionError("ceff: parameters built for " + std::to_string(params.pre_weight.size(0)) +
                         " channels, features have " + std::to_string(channels));
  }
  auto pooled = ops::global_avg_pool(ops::add(f_pre, f_post));  // [B, C]
  auto reduced = ops::relu(ops::conv1x1(pooled, params.reduce_weight, params.reduce_bias));
  auto v_pre = ops::reshape(ops::conv1x1(reduced, params.pre_weight, params.pre_bias), Shape{batch, 1, channels});
  auto v_post = ops::reshape(ops::conv1x1(reduced, params.post_weight, params.post_bias), Shape{batch, 1, channels});
  auto normalized = ops::softmax(ops::concat<T>({v_pre, v_post}, 1), 1);  // [B, 2, C]
  ChannelWeights<T> w{ops::reshape(ops::narrow(normalized, 1, 0, 1), Shape{batch, channels}),
                      ops::reshape(ops::narrow(normalized, 1, 1, 1), Shape{batch, channels})};
  auto enhanced = ops::add(ops::scale_channels(f_pre, w.pre), ops::scale_channels(f_post, w.post));
  return {enhanced, w};
}

FusionMode parse_fusion_mode(std::string_view name) {
  if (name == "ceff") return FusionMode::ceff;
  if (name == "subtract") return FusionMode::subtract;
  if (name == "add") return FusionMode::add;
  if (name == "concat") return FusionMode::concat;
  throw ConfigError("unknown fusion mode '" + std::string(name) + "' (expected ceff, subtract, add or concat)");
}

std::string_view to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::ceff: return "ceff";
    case FusionMode::subtract: return "subtract";
    case FusionMode::add: return "add";
    case FusionMode::concat: return "concat";
  }
  return "unknown";
}

template <typename T>
DiffParams<T> DiffParams<T>::init(std::size_t channels, FusionMode mode, Rng& rng) {
  if (mode == FusionMode::ceff) throw ConfigError("difference module does not support ceff mode");
  const std::size_t in = mode == FusionMode::concat ? 2 * channels : channels;
  DiffParams p;
  p.conv1_weight = init::fan_in_uniform<T>(Shape{channels, in, 3, 3}, in * 9, rng);
  p.conv1_bias = init::constant<T>(Shape{channels}, T(0));
  p.norm_weight = init::constant<T>(Shape{channels}, T(1));
  p.norm_bias = init::constant<T>(Shape{channels}, T(0));
  p.conv2_weight = init::fan_in_uniform<T>(Shape{channels, channels, 3, 3}, channels * 9, rng);
  p.conv2_bias = init::constant<T>(Shape{channels}, T(0));
  return p;
}

template <typename T>
void DiffParams<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  out.emplace_back(prefix + "conv1.weight", conv1_weight);
  out.emplace_back(prefix + "conv1.bias", conv1_bias);
  out.emplace_back(prefix + "norm.weight", norm_weight);
  out.emplace_back(prefix + "norm.bias", norm_bias);
  out.emplace_back(prefix + "conv2.weight", conv2_weight);
  out.emplace_back(prefix + "conv2.bias", conv2_bias);
}

template <typename T>
Tensor<T> combine_streams(const Tensor<T>& f_pre, const Tensor<T>& f_post, FusionMode mode) {
  if (f_pre.shape() != f_post.shape()) {
    throw DimensionError("combine_streams: stream shapes differ: " + shape_str(f_pre.shape()) + " vs " +
                         shape_str(f_post.shape()));
  }
  switch (mode) {
    case FusionMode::subtract: return ops::sub(f_pre, f_post);
    case FusionMode::add: return ops::add(f_pre, f_post);
    case FusionMode::concat: return ops::concat<T>({f_pre, f_post}, 1);
    case FusionMode::ceff: break;
  }
  throw ConfigError("combine_streams: ceff is not a difference-module mode");
}

template <typename T>
Tensor<T> diff_fuse(const Tensor<T>& f_pre, const Tensor<T>& f_post, FusionMode mode, const DiffParams<T>& params) {
  auto x = combine_streams(f_pre, f_post, mode);
  x = ops::conv2d(x, params.conv1_weight, params.conv1_bias, 1, 1);
  x = ops::relu(ops::layer_norm(x, 1, params.norm_weight, params.norm_bias));
  return ops::conv2d(x, params.conv2_weight, params.conv2_bias, 1, 1);
}

#define INSTANTIATE(T)                                                                            \
  template struct CEFFParams<T>;                                                                   \
  template struct DiffParams<T>;                                                                   \
  template CEFFResult<T> ceff(const Tensor<T>&, const Tensor<T>&, const CEFFParams<T>&);          \
  template Tensor<T> combine_streams(const Tensor<T>&, const Tensor<T>&, FusionMode);             \
  template Tensor<T> diff_fuse(const Tensor<T>&, const Tensor<T>&, FusionMode, const DiffParams<T>&);
INSTANTIATE(float)
INSTANTIATE(double)
#undef INSTANTIATE

}  // namespace sparsecd
