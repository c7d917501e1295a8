#pragma once

// Per-class centroid treatment on deep features: pull every feature vector
// toward its class centroid in direction (cosine), leaving magnitude free.

#include <cstdint>
#include <vector>

#include "segdoctor/core/array4d.hpp"
#include "segdoctor/core/types.hpp"

namespace segdoctor {

template <typename T>
struct CategoryLossResult {
  T value = 0;                   // mean penalty over contributing pixels
  std::vector<T> per_class;      // mean penalty per class, 0 where absent
  int64_t contributing_pixels = 0;
  Array4D<T> d_features;         // d(value)/d(deep features), same shape
};

// Per-class mean of the deep features. Labels may come in at any resolution
// >= the feature grid; they are reduced with the corner-anchored mapping
// first. Ignore pixels contribute to no class.
template <typename T>
ClassCentroids<T> compute_centroids(const FeatureMap<T>& deep,
                                    const LabelMap& labels);

// Exponential-moving-average variant of centroid tracking:
//   state <- decay*state + (1-decay)*batch   for classes present in both,
// first-seen classes adopt the batch mean, classes absent from the batch are
// left alone. Counts accumulate.
template <typename T>
void ema_update(ClassCentroids<T>& state, const ClassCentroids<T>& batch,
                T decay);

// Mean over non-ignore pixels of 1 - cos(centroid[k], feature), with the
// centroids treated as constants. The gradient with respect to the features
// is returned alongside the value (skip it with with_grad=false).
template <typename T>
CategoryLossResult<T> category_loss(const FeatureMap<T>& deep,
                                    const ClassCentroids<T>& centroids,
                                    const LabelMap& labels,
                                    bool with_grad = true);

}  // namespace segdoctor
