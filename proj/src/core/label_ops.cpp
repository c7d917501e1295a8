#include "segdoctor/core/label_ops.hpp"

#include <string>

namespace segdoctor {

template <typename T>
OneHot<T> one_hot(const LabelMap& labels) {
  const int N = labels.n(), H = labels.h(), W = labels.w();
  const int K = labels.num_classes();
  OneHot<T> out;
  out.data = Array4D<T>(N, K, H, W, T(0));
  out.valid = Array4D<uint8_t>(N, 1, H, W, uint8_t(0));
  for (int n = 0; n < N; ++n)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const int32_t v = labels.at(n, y, x);
        if (v == labels.ignore_index()) continue;
        if (v < 0 || v >= K)
          throw ValidationError(
              "one_hot: label " + std::to_string(v) + " at (batch=" +
              std::to_string(n) + ", y=" + std::to_string(y) + ", x=" +
              std::to_string(x) + ") exceeds num_classes=" + std::to_string(K));
        out.data(n, v, y, x) = T(1);
        out.valid(n, 0, y, x) = 1;
      }
  return out;
}

LabelMap downsample_labels(const LabelMap& labels, int target_h, int target_w) {
  check(target_h >= 1 && target_w >= 1,
        "downsample_labels: target dimensions must be >= 1");
  check(target_h <= labels.h() && target_w <= labels.w(),
        "downsample_labels: target dims must not exceed source dims");
  LabelMap out(labels.n(), target_h, target_w, labels.num_classes(),
               labels.ignore_index());
  for (int n = 0; n < labels.n(); ++n)
    for (int ty = 0; ty < target_h; ++ty) {
      const int sy = static_cast<int>(static_cast<int64_t>(ty) * labels.h() /
                                      target_h);
      for (int tx = 0; tx < target_w; ++tx) {
        const int sx = static_cast<int>(static_cast<int64_t>(tx) * labels.w() /
                                        target_w);
        out.at(n, ty, tx) = labels.at(n, sy, sx);
      }
    }
  return out;
}

template <typename T>
Array4D<T> make_coordinate_field(int n, int h, int w) {
  Array4D<T> coords(n, 2, h, w);
  for (int i = 0; i < n; ++i)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        coords(i, 0, y, x) = static_cast<T>(x);
        coords(i, 1, y, x) = static_cast<T>(y);
      }
  return coords;
}

template OneHot<float> one_hot<float>(const LabelMap&);
template OneHot<double> one_hot<double>(const LabelMap&);
template Array4D<float> make_coordinate_field<float>(int, int, int);
template Array4D<double> make_coordinate_field<double>(int, int, int);

}  // namespace segdoctor
