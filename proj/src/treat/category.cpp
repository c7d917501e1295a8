#include "segdoctor/treat/category.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "segdoctor/core/errors.hpp"
#include "segdoctor/core/label_ops.hpp"

namespace segdoctor {

namespace {

// Reduce labels onto the feature grid when they come in at image resolution.
LabelMap labels_at_grid(const LabelMap& labels, int n, int h, int w) {
  check(labels.n() == n, "category treatment: batch size mismatch (features " +
                             std::to_string(n) + ", labels " +
                             std::to_string(labels.n()) + ")");
  check(labels.h() >= h && labels.w() >= w,
        "category treatment: label grid is smaller than the feature grid");
  if (labels.h() == h && labels.w() == w) return labels;
  return downsample_labels(labels, h, w);
}

}  // namespace

template <typename T>
ClassCentroids<T> compute_centroids(const FeatureMap<T>& deep,
                                    const LabelMap& labels) {
  const auto& f = deep.data;
  const int N = f.n(), C = f.c(), H = f.h(), W = f.w();
  const LabelMap lab = labels_at_grid(labels, N, H, W);
  lab.validate();
  const int K = lab.num_classes();

  // accumulate in double regardless of Dtype; centroids feed a detached
  // constant into the loss, so this costs nothing at training time
  std::vector<double> sums(static_cast<size_t>(K) * C, 0.0);
  ClassCentroids<T> out(K, C);
  for (int n = 0; n < N; ++n)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        if (lab.is_ignore(n, y, x)) continue;
        const int32_t k = lab.at(n, y, x);
        ++out.counts[k];
        double* s = sums.data() + static_cast<size_t>(k) * C;
        for (int c = 0; c < C; ++c) s[c] += f(n, c, y, x);
      }
  for (int k = 0; k < K; ++k) {
    if (out.counts[k] == 0) continue;
    out.present[k] = 1;
    const double inv = 1.0 / static_cast<double>(out.counts[k]);
    for (int c = 0; c < C; ++c)
      out.center(k)[c] =
          static_cast<T>(sums[static_cast<size_t>(k) * C + c] * inv);
  }
  return out;
}

template <typename T>
void ema_update(ClassCentroids<T>& state, const ClassCentroids<T>& batch,
                T decay) {
  check(state.num_classes == batch.num_classes &&
            state.channels == batch.channels,
        "ema_update: centroid shapes differ");
  check(decay >= T(0) && decay <= T(1), "ema_update: decay must lie in [0,1]");
  for (int k = 0; k < state.num_classes; ++k) {
    if (!batch.present[k]) continue;
    if (state.present[k]) {
      for (int c = 0; c < state.channels; ++c)
        state.center(k)[c] = decay * state.center(k)[c] +
                             (T(1) - decay) * batch.center(k)[c];
    } else {
      for (int c = 0; c < state.channels; ++c)
        state.center(k)[c] = batch.center(k)[c];
      state.present[k] = 1;
    }
    state.counts[k] += batch.counts[k];
  }
}

template <typename T>
CategoryLossResult<T> category_loss(const FeatureMap<T>& deep,
                                    const ClassCentroids<T>& centroids,
                                    const LabelMap& labels, bool with_grad) {
  const auto& f = deep.data;
  const int N = f.n(), C = f.c(), H = f.h(), W = f.w();
  const LabelMap lab = labels_at_grid(labels, N, H, W);
  const int K = lab.num_classes();
  check(centroids.num_classes == K,
        "category_loss: centroid class count " +
            std::to_string(centroids.num_classes) + " != label classes " +
            std::to_string(K));
  check(centroids.channels == C,
        "category_loss: centroid channels " +
            std::to_string(centroids.channels) + " != feature channels " +
            std::to_string(C));

  CategoryLossResult<T> out;
  out.per_class.assign(K, T(0));
  out.d_features = Array4D<T>(N, C, H, W, T(0));

  // precompute centroid norms
  std::vector<double> cnorm(K, 0.0);
  for (int k = 0; k < K; ++k) {
    double s = 0;
    for (int c = 0; c < C; ++c) {
      const double v = centroids.center(k)[c];
      s += v * v;
    }
    cnorm[k] = std::sqrt(s);
  }

  std::vector<double> class_sum(K, 0.0);
  std::vector<int64_t> class_cnt(K, 0);
  std::vector<double> r(C);
  int64_t total = 0;
  for (int n = 0; n < N; ++n)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        if (lab.is_ignore(n, y, x)) continue;
        const int32_t k = lab.at(n, y, x);
        double dot = 0, rsq = 0;
        for (int c = 0; c < C; ++c) {
          r[c] = f(n, c, y, x);
          dot += r[c] * static_cast<double>(centroids.center(k)[c]);
          rsq += r[c] * r[c];
        }
        const double nr = std::sqrt(rsq);
        const double denom = (cnorm[k] + kNormEps) * (nr + kNormEps);
        const double pen = 1.0 - dot / denom;
        class_sum[k] += pen;
        ++class_cnt[k];
        ++total;
        if (with_grad) {
          // d(1 - dot/denom)/dR, with the zero-norm direction guarded
          const double t2 =
              nr > 0 ? dot / (denom * (nr + kNormEps) * nr) : 0.0;
          for (int c = 0; c < C; ++c)
            out.d_features(n, c, y, x) = static_cast<T>(
                -static_cast<double>(centroids.center(k)[c]) / denom +
                t2 * r[c]);
        }
      }

  out.contributing_pixels = total;
  double sum = 0;
  for (int k = 0; k < K; ++k) {
    sum += class_sum[k];
    if (class_cnt[k] > 0)
      out.per_class[k] = static_cast<T>(class_sum[k] / class_cnt[k]);
  }
  if (total > 0) {
    out.value = static_cast<T>(sum / static_cast<double>(total));
    if (with_grad) {
      const T inv = static_cast<T>(1.0 / static_cast<double>(total));
      for (auto& g : out.d_features) g *= inv;
    }
  }
  return out;
}

template ClassCentroids<float> compute_centroids(const FeatureMap<float>&,
                                                 const LabelMap&);
template ClassCentroids<double> compute_centroids(const FeatureMap<double>&,
                                                  const LabelMap&);
template void ema_update(ClassCentroids<float>&, const ClassCentroids<float>&,
                         float);
template void ema_update(ClassCentroids<double>&,
                         const ClassCentroids<double>&, double);
template CategoryLossResult<float> category_loss(const FeatureMap<float>&,
                                                 const ClassCentroids<float>&,
                                                 const LabelMap&, bool);
template CategoryLossResult<double> category_loss(const FeatureMap<double>&,
                                                  const ClassCentroids<double>&,
                                                  const LabelMap&, bool);

}  // namespace segdoctor
