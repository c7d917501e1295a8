#pragma once

// Boundary geometry on label maps: 8-connected boundary extraction, the
// d-wide band around class transitions, and a tolerance-d boundary-F score
// (micro-averaged over images). All distances are Chebyshev, so "within d"
// means a (2d+1) x (2d+1) square neighborhood.

#include <cstdint>

#include "segdoctor/core/array4d.hpp"
#include "segdoctor/core/types.hpp"

namespace segdoctor {

// 1 where the pixel is labeled and one of its 8 neighbors carries a
// different non-ignore label; 0 elsewhere (ignore pixels included).
Array4D<uint8_t> boundary_mask(const LabelMap& labels);

// 1 where the pixel is labeled and some pixel within Chebyshev distance d
// carries a different non-ignore label. d >= 1. boundary_mask is exactly
// band_mask with d = 1.
Array4D<uint8_t> band_mask(const LabelMap& labels, int d);

// Boundary precision/recall/F with slack: a predicted boundary pixel counts
// as matched when a true boundary pixel lies within Chebyshev distance d,
// and symmetrically for recall. Counts pool across every add() call, so the
// final scores are micro-averaged over the dataset. Conventions: both maps
// empty -> perfect score, exactly one empty -> zero.
class BoundaryFAccumulator {
 public:
  explicit BoundaryFAccumulator(int d);

  void add(const LabelMap& pred, const LabelMap& gt);

  double precision() const;
  double recall() const;
  double f1() const;
  int band() const { return d_; }

 private:
  int d_;
  uint64_t pred_total_ = 0, pred_matched_ = 0;
  uint64_t gt_total_ = 0, gt_matched_ = 0;
};

// Single-shot boundary-F over one batch.
double boundary_f(const LabelMap& pred, const LabelMap& gt, int d);

}  // namespace segdoctor
