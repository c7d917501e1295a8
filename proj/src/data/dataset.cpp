#include "segdoctor/data/dataset.hpp"

#include <algorithm>

#include "segdoctor/core/errors.hpp"

namespace segdoctor {

Sample apply_augment(const Sample& s, int crop_y, int crop_x, bool hflip,
                     bool vflip, int crop_h, int crop_w) {
  check(crop_h >= 1 && crop_w >= 1, "augment: crop extent must be >= 1");
  const int sh = s.image.h(), sw = s.image.w();
  check(s.labels.h() == sh && s.labels.w() == sw,
        "augment: image/label extent mismatch for sample '" + s.id + "'");
  const int ph = std::max(sh, crop_h), pw = std::max(sw, crop_w);
  check(crop_y >= 0 && crop_y + crop_h <= ph && crop_x >= 0 &&
            crop_x + crop_w <= pw,
        "augment: crop window out of range");

  Sample out;
  out.id = s.id;
  out.image = Array4D<float>(1, 3, crop_h, crop_w, 0.0f);
  out.labels = LabelMap(1, crop_h, crop_w, s.labels.num_classes(),
                        s.labels.ignore_index());
  for (auto& v : out.labels.raw()) v = s.labels.ignore_index();

  for (int y = 0; y < crop_h; ++y) {
    const int sy = crop_y + y;
    if (sy >= sh) continue;  // padded rows stay zero / ignore
    for (int x = 0; x < crop_w; ++x) {
      const int sx = crop_x + x;
      if (sx >= sw) continue;
      const int ty = vflip ? crop_h - 1 - y : y;
      const int tx = hflip ? crop_w - 1 - x : x;
      for (int c = 0; c < 3; ++c)
        out.image(0, c, ty, tx) = s.image(0, c, sy, sx);
      out.labels.at(0, ty, tx) = s.labels.at(0, sy, sx);
    }
  }
  return out;
}

Sample augment_sample(const Sample& s, const AugmentConfig& cfg, Rng& rng) {
  const int ph = std::max(s.image.h(), cfg.crop_h);
  const int pw = std::max(s.image.w(), cfg.crop_w);
  // fixed draw order keeps the stream aligned across configurations
  const int cy = static_cast<int>(rng.uniform_int(
      static_cast<uint64_t>(ph - cfg.crop_h + 1)));
  const int cx = static_cast<int>(rng.uniform_int(
      static_cast<uint64_t>(pw - cfg.crop_w + 1)));
  const bool hf = rng.bernoulli(0.5) && cfg.hflip;
  const bool vf = rng.bernoulli(0.5) && cfg.vflip;
  return apply_augment(s, cy, cx, hf, vf, cfg.crop_h, cfg.crop_w);
}

}  // namespace segdoctor
