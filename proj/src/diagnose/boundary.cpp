#include "segdoctor/diagnose/boundary.hpp"

#include <algorithm>
#include <string>

#include "segdoctor/core/errors.hpp"

namespace segdoctor {

namespace {

// Shared scan: pixel set where a differently-labeled valid pixel sits within
// Chebyshev distance d.
Array4D<uint8_t> transition_scan(const LabelMap& labels, int d) {
  const int n = labels.n(), h = labels.h(), w = labels.w();
  Array4D<uint8_t> out(n, 1, h, w);
  for (int i = 0; i < n; ++i) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (labels.is_ignore(i, y, x)) continue;
        const int32_t lab = labels.at(i, y, x);
        const int y0 = std::max(0, y - d), y1 = std::min(h - 1, y + d);
        const int x0 = std::max(0, x - d), x1 = std::min(w - 1, x + d);
        uint8_t hit = 0;
        for (int yy = y0; yy <= y1 && !hit; ++yy) {
          for (int xx = x0; xx <= x1; ++xx) {
            if (labels.is_ignore(i, yy, xx)) continue;
            if (labels.at(i, yy, xx) != lab) {
              hit = 1;
              break;
            }
          }
        }
        out(i, 0, y, x) = hit;
      }
    }
  }
  return out;
}

// Count of set pixels in `probe` with a set pixel of `target` within
// Chebyshev distance d, plus the total set count of `probe`.
void match_count(const Array4D<uint8_t>& probe, const Array4D<uint8_t>& target,
                 int d, uint64_t* matched, uint64_t* total) {
  const int n = probe.n(), h = probe.h(), w = probe.w();
  for (int i = 0; i < n; ++i) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!probe(i, 0, y, x)) continue;
        ++*total;
        const int y0 = std::max(0, y - d), y1 = std::min(h - 1, y + d);
        const int x0 = std::max(0, x - d), x1 = std::min(w - 1, x + d);
        bool hit = false;
        for (int yy = y0; yy <= y1 && !hit; ++yy) {
          for (int xx = x0; xx <= x1; ++xx) {
            if (target(i, 0, yy, xx)) {
              hit = true;
              break;
            }
          }
        }
        if (hit) ++*matched;
      }
    }
  }
}

}  // namespace

Array4D<uint8_t> boundary_mask(const LabelMap& labels) {
  return transition_scan(labels, 1);
}

Array4D<uint8_t> band_mask(const LabelMap& labels, int d) {
  check(d >= 1, "band_mask: band width must be at least 1, got " +
                    std::to_string(d));
  return transition_scan(labels, d);
}

BoundaryFAccumulator::BoundaryFAccumulator(int d) : d_(d) {
  check(d >= 0, "boundary-F: matching tolerance must be nonnegative");
}

void BoundaryFAccumulator::add(const LabelMap& pred, const LabelMap& gt) {
  check(pred.n() == gt.n() && pred.h() == gt.h() && pred.w() == gt.w(),
        "boundary-F: prediction and ground truth shapes differ");
  const Array4D<uint8_t> bp = boundary_mask(pred);
  const Array4D<uint8_t> bg = boundary_mask(gt);
  match_count(bp, bg, d_, &pred_matched_, &pred_total_);
  match_count(bg, bp, d_, &gt_matched_, &gt_total_);
}

double BoundaryFAccumulator::precision() const {
  if (pred_total_ == 0) return gt_total_ == 0 ? 1.0 : 0.0;
  return static_cast<double>(pred_matched_) / static_cast<double>(pred_total_);
}

double BoundaryFAccumulator::recall() const {
  if (gt_total_ == 0) return pred_total_ == 0 ? 1.0 : 0.0;
  return static_cast<double>(gt_matched_) / static_cast<double>(gt_total_);
}

double BoundaryFAccumulator::f1() const {
  if (pred_total_ == 0 && gt_total_ == 0) return 1.0;
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

double boundary_f(const LabelMap& pred, const LabelMap& gt, int d) {
  BoundaryFAccumulator acc(d);
  acc.add(pred, gt);
  return acc.f1();
}

}  // namespace segdoctor
