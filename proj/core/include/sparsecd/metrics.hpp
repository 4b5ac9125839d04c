#pragma once

#include <cstdint>

#include "sparsecd/image.hpp"

namespace sparsecd {

/// Pixel counts with "change" (1) as the positive class.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

struct MetricReport {
  double f1 = 0;
  double iou = 0;
  double oa = 0;
};

ConfusionCounts confusion(const ChangeMask& pred, const ChangeMask& gt);

/// Change-class F1/IoU and overall accuracy. When nothing changed and
/// nothing was predicted (tp + fp + fn == 0), f1 = iou = 1.
MetricReport metrics(const ConfusionCounts& counts);

}  // namespace sparsecd
