#include <cmath>

#include "segdoctor/core/errors.hpp"
#include "segdoctor/data/dataset.hpp"

namespace segdoctor {

namespace {

// shape predicates; painter's order decides overlaps in mask and image alike
struct Shape {
  int kind = 0;  // 0 rect, 1 disk, 2 triangle
  int cls = 1;
  double p[6] = {0};  // rect: x0,y0,x1,y1; disk: cx,cy,r; tri: 3 vertices

  bool inside(double x, double y) const {
    switch (kind) {
      case 0:
        return x >= p[0] && x < p[2] && y >= p[1] && y < p[3];
      case 1: {
        const double dx = x - p[0], dy = y - p[1];
        return dx * dx + dy * dy <= p[2] * p[2];
      }
      default: {
        // consistent-sign edge functions
        auto edge = [](double ax, double ay, double bx, double by, double px,
                       double py) {
          return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
        };
        const double e0 = edge(p[0], p[1], p[2], p[3], x, y);
        const double e1 = edge(p[2], p[3], p[4], p[5], x, y);
        const double e2 = edge(p[4], p[5], p[0], p[1], x, y);
        return (e0 >= 0 && e1 >= 0 && e2 >= 0) ||
               (e0 <= 0 && e1 <= 0 && e2 <= 0);
      }
    }
  }
};

}  // namespace

SynthDataset::SynthDataset(const SynthParams& params) : params_(params) {
  check(params.count >= 1, "SynthDataset: count must be >= 1");
  check(params.num_classes >= 2, "SynthDataset: need at least 2 classes");
  check(params.size >= 16 && params.size % 16 == 0,
        "SynthDataset: size must be a positive multiple of 16, got " +
            std::to_string(params.size));
}

void SynthDataset::class_color(int k, float* rgb) {
  // fixed, well-separated palette; repeats after 8 classes
  static const float palette[8][3] = {
      {0.35f, 0.55f, 0.35f},  // background moss
      {0.85f, 0.25f, 0.20f},  // red
      {0.20f, 0.45f, 0.85f},  // blue
      {0.90f, 0.80f, 0.25f},  // yellow
      {0.60f, 0.30f, 0.70f},  // purple
      {0.95f, 0.55f, 0.20f},  // orange
      {0.25f, 0.75f, 0.75f},  // teal
      {0.85f, 0.45f, 0.65f},  // pink
  };
  for (int c = 0; c < 3; ++c) rgb[c] = palette[k % 8][c];
}

Sample SynthDataset::get(int index) const {
  check(index >= 0 && index < params_.count,
        "SynthDataset: index " + std::to_string(index) + " out of range");
  // per-sample stream derived from (seed, index) so access order is moot
  Rng rng(params_.seed + 0x9E3779B97F4A7C15ull * (index + 1));
  const int sz = params_.size;
  const int k = params_.num_classes;

  const int nshapes = 1 + static_cast<int>(rng.uniform_int(3));
  std::vector<Shape> shapes;
  for (int i = 0; i < nshapes; ++i) {
    Shape sh;
    sh.kind = static_cast<int>(rng.uniform_int(3));
    sh.cls = 1 + static_cast<int>(rng.uniform_int(k - 1));
    const double ext = rng.uniform(0.18, 0.42) * sz;  // shape half-extent
    const double cx = rng.uniform(0.2, 0.8) * sz;
    const double cy = rng.uniform(0.2, 0.8) * sz;
    switch (sh.kind) {
      case 0:
        sh.p[0] = cx - ext;
        sh.p[1] = cy - ext * rng.uniform(0.5, 1.0);
        sh.p[2] = cx + ext;
        sh.p[3] = cy + ext * rng.uniform(0.5, 1.0);
        break;
      case 1:
        sh.p[0] = cx;
        sh.p[1] = cy;
        sh.p[2] = ext;
        break;
      default:
        for (int v = 0; v < 3; ++v) {
          const double ang = rng.uniform(0, 2 * M_PI);
          sh.p[2 * v] = cx + ext * std::cos(ang);
          sh.p[2 * v + 1] = cy + ext * std::sin(ang);
        }
        break;
    }
    shapes.push_back(sh);
  }

  // texture phases for the background
  const double phx = rng.uniform(0, 2 * M_PI);
  const double phy = rng.uniform(0, 2 * M_PI);
  const double freq = rng.uniform(0.15, 0.45);

  Sample s;
  s.id = "synth-" + std::to_string(index);
  s.image = Array4D<float>(1, 3, sz, sz);
  s.labels = LabelMap(1, sz, sz, k);

  float rgb[3];
  for (int y = 0; y < sz; ++y)
    for (int x = 0; x < sz; ++x) {
      // one geometry decision paints both mask and image
      int cls = 0;
      for (const auto& sh : shapes)
        if (sh.inside(x + 0.5, y + 0.5)) cls = sh.cls;
      s.labels.at(0, y, x) = cls;

      class_color(cls, rgb);
      double shade;
      if (cls == 0) {
        // textured background: sinusoid plus noise
        shade = 0.18 * std::sin(freq * x + phx) * std::sin(freq * y + phy) +
                rng.uniform(-0.06, 0.06);
      } else {
        shade = rng.uniform(-0.04, 0.04);
      }
      for (int c = 0; c < 3; ++c) {
        double v = rgb[c] + shade;
        s.image(0, c, y, x) =
            static_cast<float>(std::min(1.0, std::max(0.0, v)));
      }
    }
  return s;
}

}  // namespace segdoctor
