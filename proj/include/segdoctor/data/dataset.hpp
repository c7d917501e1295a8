#pragma once

// Datasets hand out raw (image, labels) pairs; augmentation is a separate
// pure step so the training loop controls every random draw. The synthetic
// generator paints mask and image from one geometry pass, so their
// boundaries agree exactly by construction.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "segdoctor/core/array4d.hpp"
#include "segdoctor/core/random.hpp"
#include "segdoctor/core/types.hpp"

namespace segdoctor {

struct Sample {
  Array4D<float> image;  // (1, 3, H, W) rgb in [0, 1]
  LabelMap labels;       // (1, H, W)
  std::string id;
};

class Dataset {
 public:
  virtual ~Dataset() = default;
  virtual int size() const = 0;
  virtual Sample get(int index) const = 0;  // raw, un-augmented
  virtual int num_classes() const = 0;
};

// ------------------------------------------------------------ augmentation

struct AugmentConfig {
  int crop_h = 64, crop_w = 64;
  bool hflip = true, vflip = true;
};

// Deterministic core: pad (image zeros / labels ignore, bottom-right), crop
// at (crop_y, crop_x), then flip. Exposed separately so tests can pin every
// choice.
Sample apply_augment(const Sample& s, int crop_y, int crop_x, bool hflip,
                     bool vflip, int crop_h, int crop_w);

// Random wrapper: draws crop offset and flip coins from rng (fixed draw
// order), honoring the config toggles.
Sample augment_sample(const Sample& s, const AugmentConfig& cfg, Rng& rng);

// --------------------------------------------------------------- synthetic

struct SynthParams {
  int count = 10;
  int size = 64;         // square images, divisible by 16
  int num_classes = 3;   // background 0 plus shape classes 1..K-1
  uint64_t seed = 1;
};

// Colored rectangles, disks, and triangles on a textured background.
// Each sample is generated from seed and index alone, so access order and
// repetition cannot change the data.
class SynthDataset : public Dataset {
 public:
  explicit SynthDataset(const SynthParams& params);

  int size() const override { return params_.count; }
  Sample get(int index) const override;
  int num_classes() const override { return params_.num_classes; }

  // base palette color of one class, rgb in [0, 1]
  static void class_color(int k, float* rgb);

 private:
  SynthParams params_;
};

// -------------------------------------------------------------- voc-format

// Directory layout: images/<stem>.(png|jpg|jpeg), masks/<stem>.png,
// splits/<split>.txt with one stem per line. Masks are single-channel index
// images, 255 = ignore. Construction scans the split and validates every
// mask, reporting all broken files in one error; images load lazily.
class VocDataset : public Dataset {
 public:
  VocDataset(const std::filesystem::path& root, const std::string& split,
             int num_classes);

  int size() const override { return static_cast<int>(stems_.size()); }
  Sample get(int index) const override;
  int num_classes() const override { return num_classes_; }
  const std::vector<std::string>& stems() const { return stems_; }

 private:
  std::filesystem::path root_;
  int num_classes_;
  std::vector<std::string> stems_;
  std::vector<std::filesystem::path> image_files_;
  std::vector<LabelMap> masks_;  // validated up front; small next to images
};

}  // namespace segdoctor
