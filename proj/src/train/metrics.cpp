#include "segdoctor/train/metrics.hpp"

#include <string>

#include "segdoctor/core/errors.hpp"

namespace segdoctor {

template <typename T>
LabelMap argmax_labels(const Array4D<T>& logits) {
  const int n = logits.n(), k = logits.c(), h = logits.h(), w = logits.w();
  check(k >= 1, "argmax_labels: no channels");
  LabelMap out(n, h, w, k);
  for (int i = 0; i < n; ++i) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        int best = 0;
        T best_v = logits(i, 0, y, x);
        for (int c = 1; c < k; ++c) {
          const T v = logits(i, c, y, x);
          if (v > best_v) {  // strict: first max wins
            best_v = v;
            best = c;
          }
        }
        out.at(i, y, x) = static_cast<int32_t>(best);
      }
    }
  }
  return out;
}

ConfusionMatrix::ConfusionMatrix(int num_classes) : k_(num_classes) {
  check(num_classes >= 1, "confusion matrix: need at least one class");
  counts_.assign(static_cast<size_t>(k_) * k_, 0);
}

void ConfusionMatrix::add(const LabelMap& pred, const LabelMap& gt) {
  check(pred.n() == gt.n() && pred.h() == gt.h() && pred.w() == gt.w(),
        "confusion matrix: prediction and ground truth shapes differ");
  check(gt.num_classes() == k_ && pred.num_classes() == k_,
        "confusion matrix: class count mismatch");
  for (int i = 0; i < gt.n(); ++i) {
    for (int y = 0; y < gt.h(); ++y) {
      for (int x = 0; x < gt.w(); ++x) {
        if (gt.is_ignore(i, y, x)) continue;
        const int32_t g = gt.at(i, y, x);
        const int32_t p = pred.at(i, y, x);
        check(!pred.is_ignore(i, y, x),
              "confusion matrix: prediction carries the ignore index at a "
              "labeled pixel");
        counts_[static_cast<size_t>(g) * k_ + p] += 1;
      }
    }
  }
}

void ConfusionMatrix::reset() {
  counts_.assign(counts_.size(), 0);
}

uint64_t ConfusionMatrix::at(int gt, int pred) const {
  check(gt >= 0 && gt < k_ && pred >= 0 && pred < k_,
        "confusion matrix: class index out of range");
  return counts_[static_cast<size_t>(gt) * k_ + pred];
}

uint64_t ConfusionMatrix::gt_count(int k) const {
  uint64_t s = 0;
  for (int p = 0; p < k_; ++p) s += at(k, p);
  return s;
}

uint64_t ConfusionMatrix::pred_count(int k) const {
  uint64_t s = 0;
  for (int g = 0; g < k_; ++g) s += at(g, k);
  return s;
}

uint64_t ConfusionMatrix::total() const {
  uint64_t s = 0;
  for (const uint64_t c : counts_) s += c;
  return s;
}

std::vector<double> ConfusionMatrix::per_class_iou() const {
  std::vector<double> iou(k_, 0.0);
  for (int k = 0; k < k_; ++k) {
    const uint64_t tp = at(k, k);
    const uint64_t denom = gt_count(k) + pred_count(k) - tp;  // TP+FP+FN
    iou[k] = denom == 0 ? 0.0
                        : static_cast<double>(tp) / static_cast<double>(denom);
  }
  return iou;
}

double ConfusionMatrix::miou() const {
  const std::vector<double> iou = per_class_iou();
  double sum = 0.0;
  int present = 0;
  for (int k = 0; k < k_; ++k) {
    if (!present_in_gt(k)) continue;
    sum += iou[k];
    ++present;
  }
  return present == 0 ? 0.0 : sum / present;
}

template LabelMap argmax_labels<float>(const Array4D<float>&);
template LabelMap argmax_labels<double>(const Array4D<double>&);

}  // namespace segdoctor
