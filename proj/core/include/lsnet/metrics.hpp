#pragma once
#include <cstdint>
#include <vector>

namespace lsnet {

// rows = ground truth, cols = prediction
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<int64_t> counts;  // row-major C x C

  explicit ConfusionMatrix(int c = 0) : num_classes(c), counts(static_cast<size_t>(c) * c, 0) {}

  int64_t& at(int truth, int pred) { return counts[static_cast<size_t>(truth) * num_classes + pred]; }
  int64_t at(int truth, int pred) const { return counts[static_cast<size_t>(truth) * num_classes + pred]; }

  void add(int truth, int pred) { ++at(truth, pred); }
  int64_t total() const;
};

struct EvalResult {
  double oa = 0;
  double miou = 0;
  std::vector<double> iou;        // per class; NaN when the class is absent
  std::vector<bool> class_present;  // present in ground truth or predictions
  ConfusionMatrix confusion;
};

// OA = trace/total; IoU_c = TP/(TP+FP+FN); mIoU averages over classes present
// in ground truth or predictions (absent classes are excluded, not zeroed).
EvalResult evaluate(const std::vector<int32_t>& predictions, const std::vector<int32_t>& labels, int num_classes);

EvalResult evaluate(const ConfusionMatrix& confusion);

}  // namespace lsnet
