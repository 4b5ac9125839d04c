#include "sparsecd/metrics.hpp"

#include "sparsecd/errors.hpp"

namespace sparsecd {

ConfusionCounts confusion(const ChangeMask& pred, const ChangeMask& gt) {
  if (pred.height != gt.height || pred.width != gt.width || pred.values.size() != gt.values.size()) {
    throw DimensionError("confusion: prediction " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                         " vs ground truth " + std::to_string(gt.height) + "x" + std::to_string(gt.width));
  }
  // Index by (pred, gt) bits: 0 = tn, 1 = fn, 2 = fp, 3 = tp.
  std::uint64_t bins[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    ++bins[(pred.values[i] != 0 ? 2 : 0) | (gt.values[i] != 0 ? 1 : 0)];
  }
  return {bins[3], bins[2], bins[1], bins[0]};
}

MetricReport metrics(const ConfusionCounts& c) {
  const auto total = c.total();
  if (total == 0) throw ContractError("metrics: no pixels were evaluated");
  MetricReport r;
  const auto changed = c.tp + c.fp + c.fn;
  if (changed == 0) {
    r.iou = 1.0;
    r.f1 = 1.0;
  } else {
    r.iou = static_cast<double>(c.tp) / static_cast<double>(changed);
    r.f1 = 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
  }
  r.oa = static_cast<double>(c.tp + c.tn) / static_cast<double>(total);
  return r;
}

}  // namespace sparsecd
