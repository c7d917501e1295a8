// Confusion-matrix metrics, boundary geometry, and the error decomposition,
// checked against hand-worked cases and brute-force oracles.

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "segdoctor/core/errors.hpp"
#include "segdoctor/core/random.hpp"
#include "segdoctor/diagnose/boundary.hpp"
#include "segdoctor/diagnose/decompose.hpp"
#include "segdoctor/io/image.hpp"
#include "segdoctor/train/metrics.hpp"

using namespace segdoctor;

namespace {

LabelMap lm(int h, int w, const std::vector<int32_t>& vals, int k) {
  REQUIRE(static_cast<int>(vals.size()) == h * w);
  LabelMap out(1, h, w, k);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out.at(0, y, x) = vals[y * w + x];
  }
  return out;
}

LabelMap random_labels(Rng& rng, int n, int h, int w, int k,
                       double ignore_frac = 0.0) {
  LabelMap out(n, h, w, k);
  for (int i = 0; i < n; ++i) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (ignore_frac > 0 && rng.uniform() < ignore_frac) {
          out.at(i, y, x) = out.ignore_index();
        } else {
          out.at(i, y, x) = static_cast<int32_t>(rng.uniform_int(k));
        }
      }
    }
  }
  return out;
}

// All-pairs scan: the band definition evaluated with zero cleverness.
Array4D<uint8_t> band_oracle(const LabelMap& labels, int d) {
  Array4D<uint8_t> out(labels.n(), 1, labels.h(), labels.w());
  for (int i = 0; i < labels.n(); ++i) {
    for (int y = 0; y < labels.h(); ++y) {
      for (int x = 0; x < labels.w(); ++x) {
        if (labels.is_ignore(i, y, x)) continue;
        uint8_t hit = 0;
        for (int yy = 0; yy < labels.h(); ++yy) {
          for (int xx = 0; xx < labels.w(); ++xx) {
            if (labels.is_ignore(i, yy, xx)) continue;
            const int cheb = std::max(std::abs(yy - y), std::abs(xx - x));
            if (cheb <= d && labels.at(i, yy, xx) != labels.at(i, y, x)) {
              hit = 1;
            }
          }
        }
        out(i, 0, y, x) = hit;
      }
    }
  }
  return out;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("segdoctor_metrics_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace

TEST_CASE("confusion matrix: hand-worked 2x2 case") {
  // gt rows [0,0],[1,1]; prediction everywhere 0. Class 0: TP=2, FP=2 ->
  // IoU 1/2. Class 1: TP=0, FN=2 -> IoU 0. Mean over both present classes:
  // 0.25.
  const LabelMap gt = lm(2, 2, {0, 0, 1, 1}, 2);
  const LabelMap pred = lm(2, 2, {0, 0, 0, 0}, 2);
  ConfusionMatrix cm(2);
  cm.add(pred, gt);
  CHECK(cm.at(0, 0) == 2);
  CHECK(cm.at(0, 1) == 0);
  CHECK(cm.at(1, 0) == 2);
  CHECK(cm.at(1, 1) == 0);
  const std::vector<double> iou = cm.per_class_iou();
  CHECK(iou[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(iou[1] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cm.miou() == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("confusion matrix: perfect prediction scores 1") {
  Rng rng(41);
  const LabelMap gt = random_labels(rng, 2, 9, 11, 4, 0.1);
  ConfusionMatrix cm(4);
  cm.add(gt, gt);
  CHECK(cm.miou() == doctest::Approx(1.0).epsilon(1e-15));
  for (int k = 0; k < 4; ++k) {
    if (cm.present_in_gt(k)) {
      CHECK(cm.per_class_iou()[k] == doctest::Approx(1.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("confusion matrix: classes absent from ground truth stay out of "
          "the mean") {
  // gt uses classes {0,1}; the stray prediction of class 2 hurts class 0's
  // IoU (a missed pixel) but class 2 itself is not averaged in.
  const LabelMap gt = lm(1, 4, {0, 0, 1, 1}, 3);
  const LabelMap pred = lm(1, 4, {0, 2, 1, 1}, 3);
  ConfusionMatrix cm(3);
  cm.add(pred, gt);
  const std::vector<double> iou = cm.per_class_iou();
  CHECK(iou[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(iou[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(iou[2] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(!cm.present_in_gt(2));
  CHECK(cm.miou() == doctest::Approx(0.75).epsilon(1e-15));

  // A class absent from both sides scores 0 without poisoning the mean.
  ConfusionMatrix cm2(3);
  cm2.add(lm(1, 2, {0, 1}, 3), lm(1, 2, {0, 1}, 3));
  CHECK(cm2.miou() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("confusion matrix: row sums are ground-truth pixel counts") {
  Rng rng(42);
  const LabelMap gt = random_labels(rng, 3, 13, 7, 5, 0.15);
  const LabelMap pred = random_labels(rng, 3, 13, 7, 5);
  ConfusionMatrix cm(5);
  cm.add(pred, gt);

  std::vector<uint64_t> direct(5, 0);
  uint64_t labeled = 0;
  for (int i = 0; i < gt.n(); ++i) {
    for (int y = 0; y < gt.h(); ++y) {
      for (int x = 0; x < gt.w(); ++x) {
        if (gt.is_ignore(i, y, x)) continue;
        ++direct[gt.at(i, y, x)];
        ++labeled;
      }
    }
  }
  for (int k = 0; k < 5; ++k) CHECK(cm.gt_count(k) == direct[k]);
  CHECK(cm.total() == labeled);
}

TEST_CASE("confusion matrix: invariant under class relabeling") {
  Rng rng(43);
  const LabelMap gt = random_labels(rng, 2, 10, 10, 4, 0.05);
  const LabelMap pred = random_labels(rng, 2, 10, 10, 4);
  ConfusionMatrix cm(4);
  cm.add(pred, gt);

  const int perm[4] = {2, 0, 3, 1};
  LabelMap gt_p(2, 10, 10, 4), pred_p(2, 10, 10, 4);
  for (int i = 0; i < 2; ++i) {
    for (int y = 0; y < 10; ++y) {
      for (int x = 0; x < 10; ++x) {
        gt_p.at(i, y, x) = gt.is_ignore(i, y, x) ? gt.ignore_index()
                                                 : perm[gt.at(i, y, x)];
        pred_p.at(i, y, x) = perm[pred.at(i, y, x)];
      }
    }
  }
  ConfusionMatrix cm_p(4);
  cm_p.add(pred_p, gt_p);
  for (int g = 0; g < 4; ++g) {
    for (int p = 0; p < 4; ++p) {
      CHECK(cm_p.at(perm[g], perm[p]) == cm.at(g, p));
    }
  }
  CHECK(cm_p.miou() == doctest::Approx(cm.miou()).epsilon(1e-12));
}

TEST_CASE("confusion matrix: ignore handling and validation") {
  LabelMap gt = lm(1, 3, {0, 1, 1}, 2);
  gt.at(0, 0, 1) = gt.ignore_index();
  const LabelMap pred = lm(1, 3, {1, 0, 1}, 2);
  ConfusionMatrix cm(2);
  cm.add(pred, gt);
  CHECK(cm.total() == 2);  // the ignore pixel is not counted
  CHECK(cm.at(0, 1) == 1);
  CHECK(cm.at(1, 1) == 1);

  LabelMap bad_pred = lm(1, 3, {1, 0, 1}, 2);
  bad_pred.at(0, 0, 0) = bad_pred.ignore_index();
  ConfusionMatrix cm2(2);
  CHECK_THROWS_AS(cm2.add(bad_pred, gt), ValidationError);
  CHECK_THROWS_AS(cm.add(lm(1, 2, {0, 1}, 2), gt), ValidationError);
}

TEST_CASE("argmax labels: first maximum wins ties") {
  Array4D<double> logits(1, 3, 1, 2);
  logits(0, 0, 0, 0) = 1.0;
  logits(0, 1, 0, 0) = 1.0;  // tie with channel 0
  logits(0, 2, 0, 0) = 0.5;
  logits(0, 0, 0, 1) = -1.0;
  logits(0, 1, 0, 1) = 2.0;
  logits(0, 2, 0, 1) = 2.0;  // tie with channel 1
  const LabelMap out = argmax_labels(logits);
  CHECK(out.at(0, 0, 0) == 0);
  CHECK(out.at(0, 0, 1) == 1);
  CHECK(out.num_classes() == 3);

  Rng rng(44);
  Array4D<float> big(2, 5, 6, 7);
  for (size_t i = 0; i < big.size(); ++i) {
    big.data()[i] = static_cast<float>(rng.normal());
  }
  const LabelMap got = argmax_labels(big);
  for (int i = 0; i < 2; ++i) {
    for (int y = 0; y < 6; ++y) {
      for (int x = 0; x < 7; ++x) {
        int best = 0;
        for (int c = 1; c < 5; ++c) {
          if (big(i, c, y, x) > big(i, best, y, x)) best = c;
        }
        CHECK(got.at(i, y, x) == best);
      }
    }
  }
}

TEST_CASE("boundary mask: hand cases") {
  // Constant image: nothing borders anything.
  const LabelMap flat(1, 6, 6, 3);  // all zeros
  const Array4D<uint8_t> none = boundary_mask(flat);
  for (size_t i = 0; i < none.size(); ++i) CHECK(none.data()[i] == 0);

  // Vertical split 0|1 between columns 3 and 4: exactly those two columns.
  LabelMap split(1, 8, 8, 2);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) split.at(0, y, x) = x >= 4 ? 1 : 0;
  }
  const Array4D<uint8_t> b = boundary_mask(split);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      CHECK(b(0, 0, y, x) == ((x == 3 || x == 4) ? 1 : 0));
    }
  }

  // An ignore column separating the classes absorbs the boundary: neither
  // side has a differently-labeled *valid* 8-neighbor.
  LabelMap gap(1, 8, 8, 2);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      gap.at(0, y, x) = x < 3 ? 0 : (x == 3 ? gap.ignore_index() : 1);
    }
  }
  const Array4D<uint8_t> g = boundary_mask(gap);
  for (size_t i = 0; i < g.size(); ++i) CHECK(g.data()[i] == 0);
}

TEST_CASE("band mask: matches the all-pairs oracle") {
  Rng rng(45);
  for (int trial = 0; trial < 4; ++trial) {
    const LabelMap labels =
        random_labels(rng, 1, 16, 16, 3, trial % 2 ? 0.1 : 0.0);
    for (int d = 1; d <= 3; ++d) {
      const Array4D<uint8_t> got = band_mask(labels, d);
      const Array4D<uint8_t> want = band_oracle(labels, d);
      for (size_t i = 0; i < got.size(); ++i) {
        CHECK(got.data()[i] == want.data()[i]);
      }
    }
  }
}

TEST_CASE("band mask: d=1 equals the boundary mask and bands grow with d") {
  Rng rng(46);
  const LabelMap labels = random_labels(rng, 2, 12, 14, 4, 0.05);
  const Array4D<uint8_t> b1 = band_mask(labels, 1);
  const Array4D<uint8_t> bm = boundary_mask(labels);
  for (size_t i = 0; i < b1.size(); ++i) CHECK(b1.data()[i] == bm.data()[i]);

  for (int d = 1; d < 4; ++d) {
    const Array4D<uint8_t> narrow = band_mask(labels, d);
    const Array4D<uint8_t> wide = band_mask(labels, d + 1);
    for (size_t i = 0; i < narrow.size(); ++i) {
      if (narrow.data()[i]) CHECK(wide.data()[i] == 1);
    }
  }
  CHECK_THROWS_AS(band_mask(labels, 0), ValidationError);
}

TEST_CASE("boundary-F: agreement and empty-map conventions") {
  Rng rng(47);
  const LabelMap gt = random_labels(rng, 1, 10, 10, 3);
  CHECK(boundary_f(gt, gt, 2) == doctest::Approx(1.0).epsilon(1e-15));

  // Both constant: no boundaries on either side, vacuously perfect — even
  // when the classes disagree, boundary-F only scores boundary placement.
  const LabelMap zeros(1, 6, 6, 2);
  LabelMap ones(1, 6, 6, 2);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 6; ++x) ones.at(0, y, x) = 1;
  }
  CHECK(boundary_f(zeros, zeros, 2) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(boundary_f(zeros, ones, 2) == doctest::Approx(1.0).epsilon(1e-15));

  // One side flat, the other split: one empty map -> 0.
  LabelMap split(1, 6, 6, 2);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 6; ++x) split.at(0, y, x) = x >= 3 ? 1 : 0;
  }
  CHECK(boundary_f(zeros, split, 2) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(boundary_f(split, zeros, 2) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("boundary-F: shifted edge, hand-scored") {
  // gt boundary at columns {3,4}, predicted boundary at {4,5} on 8x8.
  LabelMap gt(1, 8, 8, 2), pred(1, 8, 8, 2);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      gt.at(0, y, x) = x >= 4 ? 1 : 0;
      pred.at(0, y, x) = x >= 5 ? 1 : 0;
    }
  }
  // With slack 0 only column 4 overlaps: P = R = 8/16 = 0.5 -> F = 0.5.
  CHECK(boundary_f(pred, gt, 0) == doctest::Approx(0.5).epsilon(1e-12));
  // With slack 1 every boundary pixel has a partner one column over.
  CHECK(boundary_f(pred, gt, 1) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("boundary-F: accumulator micro-averages counts, not scores") {
  // Image A: perfect 16-pixel boundary match. Image B: pred flat (empty map)
  // against an 16-pixel gt boundary. Pooled: P = 16/16, R = 16/32 = 0.5,
  // F = 2*1*0.5/1.5 = 2/3 — not the mean of per-image scores (1+0)/2.
  LabelMap split(1, 8, 8, 2), flat(1, 8, 8, 2);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) split.at(0, y, x) = x >= 4 ? 1 : 0;
  }
  BoundaryFAccumulator acc(1);
  acc.add(split, split);
  acc.add(flat, split);
  CHECK(acc.precision() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(acc.recall() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(acc.f1() == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

namespace {

// Per-pixel classifier straight off the definition, band by all-pairs scan.
struct DecompOracle {
  uint64_t correct = 0, boundary = 0, category = 0, ignored = 0;
};

DecompOracle decomp_oracle(const LabelMap& pred, const LabelMap& gt, int d) {
  const Array4D<uint8_t> band = band_oracle(gt, d);
  DecompOracle out;
  for (int i = 0; i < gt.n(); ++i) {
    for (int y = 0; y < gt.h(); ++y) {
      for (int x = 0; x < gt.w(); ++x) {
        if (gt.is_ignore(i, y, x)) {
          ++out.ignored;
        } else if (pred.at(i, y, x) == gt.at(i, y, x)) {
          ++out.correct;
        } else if (band(i, 0, y, x)) {
          ++out.boundary;
        } else {
          ++out.category;
        }
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("decompose: perfect prediction has no errors") {
  Rng rng(48);
  const LabelMap gt = random_labels(rng, 2, 12, 12, 3, 0.1);
  const ErrorDecomposition d = decompose_errors(gt, gt, 2);
  CHECK(d.boundary_error == 0);
  CHECK(d.category_error == 0);
  CHECK(d.correct + d.ignored == 2 * 12 * 12);
  CHECK(d.boundary_f == doctest::Approx(1.0).epsilon(1e-15));
  for (const uint64_t c : d.category_confusion) CHECK(c == 0);
}

TEST_CASE("decompose: constant ground truth forces category errors") {
  const LabelMap gt(1, 8, 8, 3);  // all class 0, no boundary anywhere
  LabelMap pred(1, 8, 8, 3);
  pred.at(0, 2, 2) = 1;
  pred.at(0, 5, 1) = 2;
  const ErrorDecomposition d = decompose_errors(pred, gt, 2);
  CHECK(d.boundary_error == 0);
  CHECK(d.category_error == 2);
  CHECK(d.correct == 62);
  CHECK(d.confusion_at(0, 1) == 1);
  CHECK(d.confusion_at(0, 2) == 1);
}

TEST_CASE("decompose: hand fixture with 5 boundary and 3 category errors") {
  // Vertical 0|1 split at columns 7|8 on 16x16; d=1 band = columns {7,8}.
  LabelMap gt(1, 16, 16, 2);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) gt.at(0, y, x) = x >= 8 ? 1 : 0;
  }
  LabelMap pred = gt;
  for (int y = 0; y < 5; ++y) pred.at(0, y, 8) = 0;   // in-band flips
  for (int y = 10; y < 13; ++y) pred.at(0, y, 2) = 1;  // interior flips
  const ErrorDecomposition d = decompose_errors(pred, gt, 1);
  CHECK(d.boundary_error == 5);
  CHECK(d.category_error == 3);
  CHECK(d.ignored == 0);
  CHECK(d.correct == 16 * 16 - 8);
  CHECK(d.total() == 16 * 16);
  CHECK(d.confusion_at(0, 1) == 3);
  CHECK(d.confusion_at(1, 0) == 0);  // those flips were boundary errors
}

TEST_CASE("decompose: matches the per-pixel oracle with exact partition") {
  Rng rng(49);
  for (int trial = 0; trial < 4; ++trial) {
    const LabelMap gt = random_labels(rng, 1, 14, 14, 3, trial % 2 ? 0.1 : 0);
    LabelMap pred = random_labels(rng, 1, 14, 14, 3);
    for (int d = 1; d <= 3; ++d) {
      const ErrorDecomposition got = decompose_errors(pred, gt, d);
      const DecompOracle want = decomp_oracle(pred, gt, d);
      CHECK(got.correct == want.correct);
      CHECK(got.boundary_error == want.boundary);
      CHECK(got.category_error == want.category);
      CHECK(got.ignored == want.ignored);
      CHECK(got.total() == 14 * 14);

      uint64_t conf_total = 0;
      for (const uint64_t c : got.category_confusion) conf_total += c;
      CHECK(conf_total == got.category_error);
    }
  }
}

TEST_CASE("decompose: widening the band trades category for boundary") {
  Rng rng(50);
  const LabelMap gt = random_labels(rng, 1, 16, 16, 3);
  const LabelMap pred = random_labels(rng, 1, 16, 16, 3);
  ErrorDecomposition prev = decompose_errors(pred, gt, 1);
  for (int d = 2; d <= 5; ++d) {
    const ErrorDecomposition cur = decompose_errors(pred, gt, d);
    CHECK(cur.boundary_error >= prev.boundary_error);
    CHECK(cur.category_error <= prev.category_error);
    CHECK(cur.boundary_error + cur.category_error ==
          prev.boundary_error + prev.category_error);
    prev = cur;
  }
}

TEST_CASE("decompose: invariant under simultaneous class permutation") {
  Rng rng(51);
  const LabelMap gt = random_labels(rng, 1, 12, 12, 4, 0.05);
  const LabelMap pred = random_labels(rng, 1, 12, 12, 4);
  const int perm[4] = {3, 1, 0, 2};
  LabelMap gt_p(1, 12, 12, 4), pred_p(1, 12, 12, 4);
  for (int y = 0; y < 12; ++y) {
    for (int x = 0; x < 12; ++x) {
      gt_p.at(0, y, x) = gt.is_ignore(0, y, x) ? gt.ignore_index()
                                               : perm[gt.at(0, y, x)];
      pred_p.at(0, y, x) = perm[pred.at(0, y, x)];
    }
  }
  const ErrorDecomposition a = decompose_errors(pred, gt, 2);
  const ErrorDecomposition b = decompose_errors(pred_p, gt_p, 2);
  CHECK(a.correct == b.correct);
  CHECK(a.boundary_error == b.boundary_error);
  CHECK(a.category_error == b.category_error);
  CHECK(a.ignored == b.ignored);
  for (int g = 0; g < 4; ++g) {
    for (int p = 0; p < 4; ++p) {
      CHECK(b.confusion_at(perm[g], perm[p]) == a.confusion_at(g, p));
    }
  }
}

TEST_CASE("decompose: shape and value validation") {
  const LabelMap gt = lm(1, 2, {0, 1}, 2);
  CHECK_THROWS_AS(decompose_errors(lm(1, 3, {0, 1, 0}, 2), gt, 1),
                  ValidationError);
  CHECK_THROWS_AS(decompose_errors(lm(1, 2, {0, 1}, 3), gt, 1),
                  ValidationError);
  CHECK_THROWS_AS(decompose_errors(gt, gt, 0), ValidationError);
  LabelMap holes = lm(1, 2, {0, 1}, 2);
  holes.at(0, 0, 0) = holes.ignore_index();
  CHECK_THROWS_AS(decompose_errors(holes, gt, 1), ValidationError);
}

TEST_CASE("emit_report: overlays and summary") {
  TempDir tmp;
  // Image values on the 1/255 grid so the PNG round trip is exact.
  Rng rng(52);
  Array4D<float> images(2, 3, 16, 16);
  for (size_t i = 0; i < images.size(); ++i) {
    images.data()[i] = static_cast<float>(rng.uniform_int(256)) / 255.0f;
  }

  LabelMap gt(2, 16, 16, 2);
  for (int i = 0; i < 2; ++i) {
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) gt.at(i, y, x) = x >= 8 ? 1 : 0;
    }
  }
  LabelMap pred = gt;
  // Image 0 perfect; image 1 carries the 5-boundary/3-category fixture.
  for (int y = 0; y < 5; ++y) pred.at(1, y, 8) = 0;
  for (int y = 10; y < 13; ++y) pred.at(1, y, 2) = 1;

  const std::vector<std::string> ids = {"clean", "dirty"};
  const ErrorDecomposition totals =
      emit_report(images, pred, gt, 1, ids, tmp.path.string());
  CHECK(totals.boundary_error == 5);
  CHECK(totals.category_error == 3);

  // Zero-error overlay reproduces the input exactly.
  const Array4D<float> clean = load_image(tmp.path / "overlay_clean.png");
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        CHECK(clean(0, c, y, x) ==
              doctest::Approx(images(0, c, y, x)).epsilon(1e-6));
      }
    }
  }

  // Error pixels are tinted half-way toward the marker color.
  const Array4D<float> dirty = load_image(tmp.path / "overlay_dirty.png");
  const float r = dirty(0, 0, 11, 2), g = dirty(0, 1, 11, 2),
              b = dirty(0, 2, 11, 2);  // category error -> red tint
  CHECK(r == doctest::Approx(0.5f * images(1, 0, 11, 2) + 0.5f).epsilon(5e-3));
  CHECK(g == doctest::Approx(0.5f * images(1, 1, 11, 2)).epsilon(5e-3));
  CHECK(b == doctest::Approx(0.5f * images(1, 2, 11, 2)).epsilon(5e-3));
  const float yb = dirty(0, 2, 2, 8);  // boundary error -> yellow tint
  CHECK(yb == doctest::Approx(0.5f * images(1, 2, 2, 8)).epsilon(5e-3));
  CHECK(dirty(0, 0, 2, 8) ==
        doctest::Approx(0.5f * images(1, 0, 2, 8) + 0.5f).epsilon(5e-3));

  // Summary agrees with the returned decomposition and carries the schema.
  std::ifstream in(tmp.path / "diagnosis.json");
  REQUIRE(in.good());
  nlohmann::json summary;
  in >> summary;
  CHECK(summary["schema_version"] == 1);
  CHECK(summary["band"] == 1);
  CHECK(summary["distance"] == "chebyshev");
  CHECK(summary["totals"]["boundary_error"] == 5);
  CHECK(summary["totals"]["category_error"] == 3);
  CHECK(summary["totals"]["total"] == 2 * 16 * 16);
  CHECK(summary["category_confusion"][0][1] == 3);
  REQUIRE(summary["images"].size() == 2);
  CHECK(summary["images"][0]["id"] == "clean");
  CHECK(summary["images"][0]["boundary_error"] == 0);
  CHECK(summary["images"][0]["category_error"] == 0);
  CHECK(summary["images"][1]["boundary_error"] == 5);
  CHECK(summary["images"][1]["category_error"] == 3);

  uint64_t sum_b = 0, sum_c = 0;
  for (const auto& row : summary["images"]) {
    sum_b += row["boundary_error"].get<uint64_t>();
    sum_c += row["category_error"].get<uint64_t>();
  }
  CHECK(sum_b == totals.boundary_error);
  CHECK(sum_c == totals.category_error);
}
