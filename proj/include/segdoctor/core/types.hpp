#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "segdoctor/core/array4d.hpp"
#include "segdoctor/core/errors.hpp"

namespace segdoctor {

// Numeric stabilizer shared by the treatment losses: added to vector norms
// inside cosines, to log() arguments, and to reconstruction denominators.
// Pinned; tests depend on it.
inline constexpr double kNormEps = 1e-8;

// Activation map captured at a named tap point. Construction validates
// finiteness, so anything wrapped as a FeatureMap is safe to feed into a
// loss; this doubles as the NaN firewall at the treatment boundary.
template <typename T>
struct FeatureMap {
  Array4D<T> data;
  std::string layer_tag;

  FeatureMap() = default;
  FeatureMap(Array4D<T> d, std::string tag)
      : data(std::move(d)), layer_tag(std::move(tag)) {
    if (!data.all_finite())
      throw NumericError("FeatureMap '" + layer_tag +
                         "' contains NaN or Inf entries");
  }
};

// Integer class-index grid (batch, height, width). Entries are either a
// class in [0, num_classes) or ignore_index.
class LabelMap {
 public:
  static constexpr int32_t kDefaultIgnore = 255;

  LabelMap() = default;
  LabelMap(int n, int h, int w, int num_classes,
           int32_t ignore_index = kDefaultIgnore)
      : n_(n), h_(h), w_(w), num_classes_(num_classes),
        ignore_(ignore_index),
        classes_(static_cast<size_t>(n) * h * w, 0) {
    check(n >= 1 && h >= 1 && w >= 1, "LabelMap: dimensions must be >= 1");
    check(num_classes >= 1, "LabelMap: num_classes must be >= 1");
    check(ignore_index < 0 || ignore_index >= num_classes,
          "LabelMap: ignore_index must lie outside [0, num_classes)");
  }

  int n() const { return n_; }
  int h() const { return h_; }
  int w() const { return w_; }
  int num_classes() const { return num_classes_; }
  int32_t ignore_index() const { return ignore_; }

  int32_t& at(int n, int y, int x) {
    return classes_[(static_cast<size_t>(n) * h_ + y) * w_ + x];
  }
  int32_t at(int n, int y, int x) const {
    return classes_[(static_cast<size_t>(n) * h_ + y) * w_ + x];
  }
  bool is_ignore(int n, int y, int x) const { return at(n, y, x) == ignore_; }

  const std::vector<int32_t>& raw() const { return classes_; }
  std::vector<int32_t>& raw() { return classes_; }

  // Every entry must be a valid class or the ignore index; the error names
  // the first offending pixel.
  void validate() const {
    for (int n = 0; n < n_; ++n)
      for (int y = 0; y < h_; ++y)
        for (int x = 0; x < w_; ++x) {
          const int32_t v = at(n, y, x);
          if (v != ignore_ && (v < 0 || v >= num_classes_))
            throw ValidationError(
                "LabelMap: value " + std::to_string(v) + " at (batch=" +
                std::to_string(n) + ", y=" + std::to_string(y) + ", x=" +
                std::to_string(x) + ") is outside [0," +
                std::to_string(num_classes_) + ") and is not the ignore index " +
                std::to_string(ignore_));
        }
  }

 private:
  int n_ = 0, h_ = 0, w_ = 0;
  int num_classes_ = 0;
  int32_t ignore_ = kDefaultIgnore;
  std::vector<int32_t> classes_;
};

// Per-class deep-feature centroids. Absent classes (no contributing pixel)
// carry a zero vector and present=false; they are excluded from any loss.
template <typename T>
struct ClassCentroids {
  int num_classes = 0;
  int channels = 0;
  std::vector<T> centers;       // num_classes * channels, row per class
  std::vector<uint8_t> present;  // per class
  std::vector<int64_t> counts;   // contributing pixels per class

  ClassCentroids() = default;
  ClassCentroids(int k, int c)
      : num_classes(k), channels(c),
        centers(static_cast<size_t>(k) * c, T(0)),
        present(k, 0), counts(k, 0) {}

  T* center(int k) { return centers.data() + static_cast<size_t>(k) * channels; }
  const T* center(int k) const {
    return centers.data() + static_cast<size_t>(k) * channels;
  }
};

}  // namespace segdoctor
