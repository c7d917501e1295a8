#pragma once

#include <utility>

#include "segdoctor/core/array4d.hpp"
#include "segdoctor/core/types.hpp"

namespace segdoctor {

// One-hot encoding of a LabelMap plus a validity mask. Ignore-index pixels
// encode as the all-zero vector with valid=0.
template <typename T>
struct OneHot {
  Array4D<T> data;          // (N, K, H, W)
  Array4D<uint8_t> valid;   // (N, 1, H, W), 1 where the label is not ignore
};

template <typename T>
OneHot<T> one_hot(const LabelMap& labels);

// Nearest-neighbor label downsampling with the corner-anchored mapping
// src = floor(dst * src_extent / dst_extent). Ignore entries are preserved.
LabelMap downsample_labels(const LabelMap& labels, int target_h, int target_w);

// Pixel coordinate field: channel 0 is x (column), channel 1 is y (row),
// in pixels. Input to the position-reconstruction path.
template <typename T>
Array4D<T> make_coordinate_field(int n, int h, int w);

}  // namespace segdoctor
