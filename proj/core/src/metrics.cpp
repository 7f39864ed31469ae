#include "lsnet/metrics.hpp"

#include <limits>
#include <stdexcept>

namespace lsnet {

int64_t ConfusionMatrix::total() const {
  int64_t t = 0;
  for (int64_t c : counts) t += c;
  return t;
}

EvalResult evaluate(const ConfusionMatrix& confusion) {
  const int c = confusion.num_classes;
  EvalResult r;
  r.confusion = confusion;
  r.iou.assign(static_cast<size_t>(c), std::numeric_limits<double>::quiet_NaN());
  r.class_present.assign(static_cast<size_t>(c), false);

  const int64_t total = confusion.total();
  int64_t trace = 0;
  double iou_sum = 0;
  int iou_count = 0;
  for (int i = 0; i < c; ++i) {
    trace += confusion.at(i, i);
    int64_t tp = confusion.at(i, i);
    int64_t fn = 0, fp = 0;
    for (int j = 0; j < c; ++j) {
      if (j != i) {
        fn += confusion.at(i, j);
        fp += confusion.at(j, i);
      }
    }
    const int64_t denom = tp + fp + fn;
    if (denom > 0) {
      r.class_present[static_cast<size_t>(i)] = true;
      r.iou[static_cast<size_t>(i)] = static_cast<double>(tp) / static_cast<double>(denom);
      iou_sum += r.iou[static_cast<size_t>(i)];
      ++iou_count;
    }
  }
  r.oa = total > 0 ? static_cast<double>(trace) / static_cast<double>(total) : 0.0;
  r.miou = iou_count > 0 ? iou_sum / iou_count : 0.0;
  return r;
}

EvalResult evaluate(const std::vector<int32_t>& predictions, const std::vector<int32_t>& labels, int num_classes) {
  if (predictions.size() != labels.size()) throw std::invalid_argument("evaluate: length mismatch");
  if (num_classes < 1) throw std::invalid_argument("evaluate: need at least one class");
  ConfusionMatrix cm(num_classes);
  for (size_t i = 0; i < labels.size(); ++i) {
    const int32_t t = labels[i], p = predictions[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes)
      throw std::invalid_argument("evaluate: class id out of range");
    cm.add(t, p);
  }
  return evaluate(cm);
}

}  // namespace lsnet
