#pragma once

#include <cstdint>
#include <string>

#include "sparsecd/init.hpp"
#include "sparsecd/tensor.hpp"

namespace sparsecd {

enum class ClipMode { smooth, hard };

struct SSAConfig {
  std::size_t gamma = 2;      // sparsity factor, a power of two
  double offset_clip = 2.0;   // max |offset| in pixels
  std::size_t heads = 1;
  std::size_t dim = 64;
  std::size_t mlp_ratio = 4;
  ClipMode clip_mode = ClipMode::smooth;

  void validate() const;
};

bool is_power_of_two(std::size_t v);

/// Multiply-accumulates spent on attention scores (QK^T) and on the weighted
/// value sum (PV). Projections are not counted.
struct AttentionMacs {
  std::uint64_t score = 0;
  std::uint64_t value = 0;
  std::uint64_t total() const { return score + value; }
};

/// Routes attention MAC counts on this thread into `sink` while alive.
class ScopedMacCounter {
 public:
  explicit ScopedMacCounter(AttentionMacs& sink);
  ~ScopedMacCounter();
  ScopedMacCounter(const ScopedMacCounter&) = delete;
  ScopedMacCounter& operator=(const ScopedMacCounter&) = delete;

 private:
  AttentionMacs* previous_;
};

/// Per-pixel sampling displacement [B, 2, H, W] in stage pixels. Channel 0
/// displaces along rows (the H axis), channel 1 along columns.
template <typename T>
struct OffsetField {
  Tensor<T> values;
  double clip = 0;
};

/// The gamma^2 strided subsets of a feature map. values is
/// [B, gamma^2, C, H/gamma, W/gamma] with subset index k * gamma + l, where
/// subset (k, l) at (i, j) was sampled for lattice slot (gamma*i + k, gamma*j + l).
template <typename T>
struct SparseSubsets {
  Tensor<T> values;
  Tensor<T> coords;  // [B, gamma^2 * H/gamma, W/gamma, 2] sampled (row, col)
  std::size_t gamma = 1;

  std::size_t subset_height() const { return values.size(3); }
  std::size_t subset_width() const { return values.size(4); }
  /// Subset (k, l) as a [B, C, H/gamma, W/gamma] map.
  Tensor<T> subset(std::size_t k, std::size_t l) const;
  /// Same lattice, new per-subset values (e.g. attended features).
  SparseSubsets with_values(Tensor<T> attended) const;
};

template <typename T>
struct OffsetParams {
  Tensor<T> weight;  // [2, C, 3, 3]
  Tensor<T> bias;    // [2]

  static OffsetParams zeros(std::size_t dim);
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
};

template <typename T>
struct AttentionParams {
  Tensor<T> q_weight, q_bias;
  Tensor<T> k_weight, k_bias;
  Tensor<T> v_weight, v_bias;
  Tensor<T> o_weight, o_bias;

  static AttentionParams init(std::size_t dim, Rng& rng);
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
};

template <typename T>
struct SSAParams {
  OffsetParams<T> offset;
  AttentionParams<T> attention;

  static SSAParams init(const SSAConfig& cfg, Rng& rng);
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
};

template <typename T>
struct SSALayerParams {
  Tensor<T> norm1_weight, norm1_bias;
  SSAParams<T> ssa;
  Tensor<T> norm2_weight, norm2_bias;
  Tensor<T> fc1_weight, fc1_bias;  // [dim * mlp_ratio, dim]
  Tensor<T> fc2_weight, fc2_bias;  // [dim, dim * mlp_ratio]

  static SSALayerParams init(const SSAConfig& cfg, Rng& rng);
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
};

/// 3x3 convolution C -> 2, then clipped to +-clip (clip * tanh(raw / clip) in
/// smooth mode, a hard clamp otherwise).
template <typename T>
OffsetField<T> predict_offsets(const Tensor<T>& f, const OffsetParams<T>& params, double clip,
                               ClipMode mode = ClipMode::smooth);

/// Samples subset (k, l) at (i, j) from f at
/// (gamma*i + k + d_row, gamma*j + l + d_col), with the offsets read at the
/// lattice slot and fractional positions resolved bilinearly.
template <typename T>
SparseSubsets<T> sparse_shuffle(const Tensor<T>& f, const OffsetField<T>& offsets, std::size_t gamma);

/// Writes every subset value back to the lattice slot it was sampled for.
template <typename T>
Tensor<T> unshuffle(const SparseSubsets<T>& subsets);

/// Multi-head scaled dot-product self-attention with Q/K/V/output
/// projections and no positional encoding. Accepts a feature map
/// [B, C, H, W] (tokens are pixels) or channel-major tokens [G, C, N].
/// If `weights` is given it receives the attention matrix [G*heads, N, N].
template <typename T>
Tensor<T> dense_attention(const Tensor<T>& x, const AttentionParams<T>& params, std::size_t heads,
                          Tensor<T>* weights = nullptr);

/// Offsets, sparse shuffle, attention on each of the gamma^2 subsets with
/// shared projections, unshuffle.
template <typename T>
Tensor<T> ssa_forward(const Tensor<T>& f, const SSAConfig& cfg, const SSAParams<T>& params);

/// Pre-norm residual block: x = f + SSA(LN(f)); x + MLP(LN(x)).
template <typename T>
Tensor<T> ssa_layer(const Tensor<T>& f, const SSAConfig& cfg, const SSALayerParams<T>& params);

}  // namespace sparsecd
