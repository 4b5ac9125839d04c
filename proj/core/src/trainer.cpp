#include "sparsecd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "sparsecd/checkpoint.hpp"
#include "sparsecd/errors.hpp"
#include "sparsecd/ops.hpp"
#include "sparsecd/optimizer.hpp"

namespace sparsecd {

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  AdamWConfig{beta1, beta2, 1e-8, weight_decay}.validate();
  augment.validate();
}

std::string format_log_line(const EpochLog& e) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.6f", e.epoch, e.loss, e.val.f1, e.val.iou, e.val.oa);
  return buf;
}

TensorF batch_loss(const ChangeDetector& model, const std::vector<const Sample*>& batch) {
  std::vector<const ImagePair*> pairs;
  std::vector<std::uint8_t> targets;
  for (const auto* s : batch) {
    pairs.push_back(&s->pair);
    targets.insert(targets.end(), s->mask.values.begin(), s->mask.values.end());
  }
  return ops::cross_entropy(predict_logits(model, pairs), targets);
}

std::vector<EpochLog> fit(ChangeDetector& model, const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                          const FitOptions& options) {
  cfg.validate();
  if (train.empty()) throw ConfigError("training split is empty");
  std::ofstream log;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    log.open(*options.out_dir / "metrics.log", std::ios::trunc);
    if (!log) throw IoError("cannot write " + (*options.out_dir / "metrics.log").string());
  }

  model.set_input_norm(compute_input_norm(train));
  AdamW<float> opt(model.parameters(), AdamWConfig{cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay});
  opt.zero_grad();

  std::vector<EpochLog> history;
  std::vector<std::size_t> order(train.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = linear_decay_lr(epoch, cfg.epochs, cfg.lr);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(mix_seed(cfg.seed, epoch, 0x5a17));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<Sample> augmented;
      augmented.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        // Seeded by (seed, epoch, sample index) so the draw is order-independent.
        Rng rng(mix_seed(cfg.seed, epoch + 1, order[i]));
        augmented.push_back(augment(train[order[i]], cfg.augment, rng));
      }
      std::vector<const Sample*> batch;
      for (const auto& s : augmented) batch.push_back(&s);

      const std::string where = "epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(batch_index + 1);
      double value = 0;
      try {
        auto loss = batch_loss(model, batch);
        value = loss.item();
        if (!std::isfinite(value)) throw NumericError("non-finite loss " + std::to_string(value));
        loss.backward();
        opt.step(lr);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at " + where + ": " + e.what());
      }
      opt.zero_grad();
      loss_sum += value * static_cast<double>(batch.size());
    }

    EpochLog entry;
    entry.epoch = epoch + 1;
    entry.loss = loss_sum / static_cast<double>(train.size());
    entry.val = evaluate(model, val.empty() ? train : val, cfg.batch_size);
    history.push_back(entry);
    if (options.out_dir) {
      log << format_log_line(entry) << '\n' << std::flush;
      save_model(*options.out_dir / ("ckpt_epoch_" + std::to_string(entry.epoch) + ".sfck"), model);
    }
    if (options.on_epoch) options.on_epoch(entry);
  }
  return history;
}

std::vector<ChangeMask> predict_masks(const ChangeDetector& model, const Dataset& data, std::size_t batch_size) {
  NoGradGuard guard;
  std::vector<ChangeMask> masks;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    std::vector<const ImagePair*> pairs;
    for (std::size_t i = start; i < end; ++i) pairs.push_back(&data[i].pair);
    for (auto& m : predict_mask(predict_logits(model, pairs))) masks.push_back(std::move(m));
  }
  return masks;
}

ConfusionCounts evaluate_counts(const ChangeDetector& model, const Dataset& data, std::size_t batch_size) {
  const auto masks = predict_masks(model, data, batch_size);
  ConfusionCounts total;
  for (std::size_t i = 0; i < data.size(); ++i) total += confusion(masks[i], data[i].mask);
  return total;
}

MetricReport evaluate(const ChangeDetector& model, const Dataset& data, std::size_t batch_size) {
  return metrics(evaluate_counts(model, data, batch_size));
}

}  // namespace sparsecd
