#pragma once

#include <string>
#include <string_view>

#include "sparsecd/init.hpp"
#include "sparsecd/tensor.hpp"

namespace sparsecd {

/// Per-channel stream weights [B, C]; pre + post == 1 elementwise.
template <typename T>
struct ChannelWeights {
  Tensor<T> pre;
  Tensor<T> post;
};

/// Change-enhanced fusion parameters. A shared reduction C -> C/r followed
/// by one 1x1 projection per stream back to C.
template <typename T>
struct CEFFParams {
  Tensor<T> reduce_weight, reduce_bias;  // [C/r, C], [C/r]
  Tensor<T> pre_weight, pre_bias;        // [C, C/r], [C]
  Tensor<T> post_weight, post_bias;      // [C, C/r], [C]

  static CEFFParams init(std::size_t channels, std::size_t reduction, Rng& rng);
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
};

template <typename T>
struct CEFFResult {
  Tensor<T> enhanced;
  ChannelWeights<T> weights;
};

/// p = GAP(pre + post); v_s = W_s relu(W_r p); two-way softmax per channel;
/// enhanced = w_pre * pre + w_post * post.
template <typename T>
CEFFResult<T> ceff(const Tensor<T>& f_pre, const Tensor<T>& f_post, const CEFFParams<T>& params);

enum class FusionMode { ceff, subtract, add, concat };

FusionMode parse_fusion_mode(std::string_view name);
std::string_view to_string(FusionMode mode);

/// Difference-module parameters: conv3x3 -> channel norm -> ReLU -> conv3x3.
template <typename T>
struct DiffParams {
  Tensor<T> conv1_weight, conv1_bias;  // [C, Cin, 3, 3], Cin = 2C for concat
  Tensor<T> norm_weight, norm_bias;
  Tensor<T> conv2_weight, conv2_bias;  // [C, C, 3, 3]

  static DiffParams init(std::size_t channels, FusionMode mode, Rng& rng);
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
};

/// The stream combination fed to the convolution stack.
template <typename T>
Tensor<T> combine_streams(const Tensor<T>& f_pre, const Tensor<T>& f_post, FusionMode mode);

/// Baseline difference module; output has the input channel count.
template <typename T>
Tensor<T> diff_fuse(const Tensor<T>& f_pre, const Tensor<T>& f_post, FusionMode mode,
                    const DiffParams<T>& params);

}  // namespace sparsecd
