#pragma once

// Segmentation quality accounting: confusion-matrix accumulation over
// labeled pixels, per-class IoU, and mIoU over the classes that actually
// appear in the ground truth.

#include <cstdint>
#include <vector>

#include "segdoctor/core/array4d.hpp"
#include "segdoctor/core/types.hpp"

namespace segdoctor {

// Per-pixel argmax over the channel axis. Ties go to the lowest channel.
template <typename T>
LabelMap argmax_labels(const Array4D<T>& logits);

// Square count matrix, ground-truth class on the rows, prediction on the
// columns. Ignore pixels in the ground truth are skipped; the prediction
// must carry a real class everywhere it is counted.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  void add(const LabelMap& pred, const LabelMap& gt);
  void reset();

  uint64_t at(int gt, int pred) const;
  uint64_t gt_count(int k) const;    // row sum
  uint64_t pred_count(int k) const;  // column sum
  uint64_t total() const;

  // TP / (TP + FP + FN) per class; classes untouched by both sides get 0.
  std::vector<double> per_class_iou() const;
  bool present_in_gt(int k) const { return gt_count(k) > 0; }

  // Unweighted mean of per-class IoU over classes present in the ground
  // truth. No labeled pixels at all -> 0.
  double miou() const;

  int num_classes() const { return k_; }

 private:
  int k_;
  std::vector<uint64_t> counts_;  // k_ x k_, row-major
};

}  // namespace segdoctor
