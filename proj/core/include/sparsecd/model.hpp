#pragma once

#include <array>
#include <optional>
#include <vector>

#include "sparsecd/attention.hpp"
#include "sparsecd/dataset.hpp"
#include "sparsecd/fusion.hpp"
#include "sparsecd/image.hpp"

namespace sparsecd {

struct ModelConfig {
  std::array<std::size_t, 4> stage_depths{1, 1, 1, 1};
  std::array<std::size_t, 4> stage_channels{8, 16, 32, 64};
  std::array<std::size_t, 4> stage_heads{1, 1, 1, 1};
  std::size_t gamma = 2;
  std::size_t input_size = 64;
  std::size_t num_classes = 2;
  std::size_t decoder_dim = 32;
  std::size_t mlp_ratio = 4;
  std::optional<double> offset_clip;  // defaults to gamma pixels
  ClipMode clip_mode = ClipMode::smooth;
  FusionMode fusion = FusionMode::ceff;
  std::size_t ceff_reduction = 4;

  /// 3/3/9/3 layers, 64/128/320/512 channels, 512 input.
  static ModelConfig full();
  /// Desk-scale: one layer per stage, 8/16/32/64 channels, 64 input.
  static ModelConfig toy();

  /// One head per 64 channels (at least one).
  static std::array<std::size_t, 4> default_heads(const std::array<std::size_t, 4>& channels);

  double effective_offset_clip() const { return offset_clip.value_or(static_cast<double>(gamma)); }
  SSAConfig ssa_config(std::size_t stage) const;
  /// Spatial size of stage `stage` (0-based) for the configured input.
  std::size_t stage_size(std::size_t stage) const;
  void validate() const;
};

template <typename T>
struct StageParams {
  Tensor<T> embed_weight, embed_bias;  // 7x7/s4 for stage 0, 3x3/s2 after
  Tensor<T> embed_norm_weight, embed_norm_bias;
  std::vector<SSALayerParams<T>> layers;
  Tensor<T> norm_weight, norm_bias;
};

template <typename T>
struct DecoderParams {
  std::array<Tensor<T>, 4> proj_weight, proj_bias;  // [D, C_i]
  Tensor<T> fuse_weight, fuse_bias;                 // [D, 4D, 3, 3]
  Tensor<T> up_weight, up_bias;                     // [D, D, 4, 4] transpose conv
  Tensor<T> head_weight, head_bias;                 // [classes, D]
};

/// Siamese hierarchical encoder, per-stage fusion, and decoder emitting
/// per-pixel class logits. Both images go through the same encoder tensors.
class ChangeDetector {
 public:
  ChangeDetector(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  /// The four stage features of img[B, 3, S, S], S = input_size.
  std::vector<TensorF> encode(const TensorF& img) const;
  /// Per-stage fused features.
  std::vector<TensorF> fuse(const std::vector<TensorF>& pre, const std::vector<TensorF>& post) const;
  TensorF decode(const std::vector<TensorF>& fused) const;
  /// logits [B, classes, S, S] for standardized inputs at input_size.
  TensorF forward(const TensorF& pre, const TensorF& post) const;

  /// Every trainable tensor with a stable, unique name, in a fixed order.
  NamedTensors<float> parameters() const;
  std::size_t parameter_count() const;
  std::size_t encoder_parameter_count() const;

  const InputNorm& input_norm() const { return norm_; }
  void set_input_norm(const InputNorm& norm) { norm_ = norm; }

  // Direct access for tests and checkpoint loading.
  std::vector<StageParams<float>>& stages() { return stages_; }
  const std::vector<StageParams<float>>& stages() const { return stages_; }

 private:
  void collect_encoder(NamedTensors<float>& out) const;

  ModelConfig cfg_;
  std::vector<StageParams<float>> stages_;
  std::vector<CEFFParams<float>> ceff_;
  std::vector<DiffParams<float>> diff_;
  DecoderParams<float> decoder_;
  InputNorm norm_;
};

/// Standardized [B, 3, H, W] batch from images of identical shape.
TensorF images_to_tensor(const std::vector<const Image*>& images, const InputNorm& norm);

/// Bilinear resize of both images to size x size. Non-square input is an error.
ImagePair resize_pair(const ImagePair& pair, std::size_t size);
/// Differentiable bilinear resize of square logits [B, K, S, S].
TensorF resize_logits(const TensorF& logits, std::size_t size);

/// Logits at the images' own resolution: resizes to the model input size when
/// they differ and resizes the logits back.
TensorF predict_logits(const ChangeDetector& model, const std::vector<const ImagePair*>& pairs);

/// Per-pixel argmax over 2-channel logits [B, 2, H, W]; an exact tie is
/// class 0. Returns one mask per batch entry.
std::vector<ChangeMask> predict_mask(const TensorF& logits);

}  // namespace sparsecd
