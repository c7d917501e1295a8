#pragma once

// Thin image IO boundary: everything OpenCV stays behind this header. Images
// come back as (1, 3, H, W) RGB float tensors in [0, 1]; masks as LabelMap
// with 255 meaning ignore. Failures throw DataError naming the file.

#include <filesystem>

#include "segdoctor/core/array4d.hpp"
#include "segdoctor/core/types.hpp"

namespace segdoctor {

Array4D<float> load_image(const std::filesystem::path& file);

// single-channel index PNG; every value must be < num_classes or 255
LabelMap load_mask(const std::filesystem::path& file, int num_classes);

// x is (1, 3, H, W) RGB in [0, 1]; clamps and writes 8-bit
void save_image(const std::filesystem::path& file, const Array4D<float>& x);

// single-channel 8-bit index image
void save_mask(const std::filesystem::path& file, const LabelMap& labels,
               int batch_index = 0);

}  // namespace segdoctor
