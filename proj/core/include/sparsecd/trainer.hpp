#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sparsecd/augment.hpp"
#include "sparsecd/metrics.hpp"
#include "sparsecd/model.hpp"

namespace sparsecd {

struct TrainConfig {
  double lr = 4.1e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::size_t batch_size = 8;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  AugmentConfig augment;

  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double loss = 0;        // mean training loss over the epoch's samples
  MetricReport val;
};

/// `epoch,loss,f1,iou,oa` with six decimals.
std::string format_log_line(const EpochLog& e);

struct FitOptions {
  /// When set, receives `metrics.log` and `ckpt_epoch_{n}.sfck` per epoch.
  std::optional<std::filesystem::path> out_dir;
  /// Called after every epoch.
  std::function<void(const EpochLog&)> on_epoch;
};

/// Shuffled mini-batches, pixel-wise cross-entropy, AdamW with per-epoch
/// linear decay, validation after every epoch. Input statistics come from
/// `train` and are stored in the model. When `val` is empty the training
/// split is scored instead.
std::vector<EpochLog> fit(ChangeDetector& model, const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                          const FitOptions& options = {});

/// Predicted masks at each sample's own resolution.
std::vector<ChangeMask> predict_masks(const ChangeDetector& model, const Dataset& data, std::size_t batch_size = 8);

/// Micro-averaged confusion over the whole split.
ConfusionCounts evaluate_counts(const ChangeDetector& model, const Dataset& data, std::size_t batch_size = 8);
MetricReport evaluate(const ChangeDetector& model, const Dataset& data, std::size_t batch_size = 8);

/// Mean cross-entropy of one batch (with autograd when enabled).
TensorF batch_loss(const ChangeDetector& model, const std::vector<const Sample*>& batch);

}  // namespace sparsecd
