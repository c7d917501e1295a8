#pragma once

// Splits segmentation mistakes into two populations: boundary errors (wrong
// pixels within a d-band of a ground-truth class transition, i.e. localization
// slop) and category errors (wrong pixels in region interiors, i.e. the model
// chose the wrong class outright). The two counts plus correct and ignored
// partition the pixel grid exactly.

#include <cstdint>
#include <string>
#include <vector>

#include "segdoctor/core/array4d.hpp"
#include "segdoctor/core/types.hpp"

namespace segdoctor {

struct ErrorDecomposition {
  int band = 0;          // d, in pixels
  int num_classes = 0;
  uint64_t correct = 0;
  uint64_t boundary_error = 0;
  uint64_t category_error = 0;
  uint64_t ignored = 0;
  // Category errors only, row = ground-truth class, column = prediction.
  // Diagonal is zero by construction.
  std::vector<uint64_t> category_confusion;
  double boundary_f = 0.0;  // tolerance-d score over this input

  uint64_t total() const {
    return correct + boundary_error + category_error + ignored;
  }
  uint64_t confusion_at(int gt, int pred) const {
    return category_confusion[static_cast<size_t>(gt) * num_classes + pred];
  }
};

// Classifies every pixel of the batch. d >= 1; shapes and class counts must
// match; the prediction must carry a real class wherever the ground truth
// does.
ErrorDecomposition decompose_errors(const LabelMap& pred, const LabelMap& gt,
                                    int d);

// Writes one overlay per image (error pixels tinted: category red, boundary
// yellow) plus a machine-readable summary to out_dir, and returns the
// whole-batch decomposition. images is (N,3,H,W) in [0,1]; ids names the
// output files and must have one entry per image.
ErrorDecomposition emit_report(const Array4D<float>& images,
                               const LabelMap& pred, const LabelMap& gt, int d,
                               const std::vector<std::string>& ids,
                               const std::string& out_dir);

// Same report for images of varying sizes: one (image, pred, gt) triple per
// sample. Counts sum across samples and boundary-F pools its match counts, so
// a uniform batch gives identical totals either way.
struct ReportSample {
  Array4D<float> image;  // (1, 3, H, W) rgb in [0, 1]
  LabelMap pred;         // (1, H, W)
  LabelMap gt;           // (1, H, W)
  std::string id;
};

ErrorDecomposition emit_report(const std::vector<ReportSample>& samples, int d,
                               const std::string& out_dir);

}  // namespace segdoctor
