#include "segdoctor/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "segdoctor/core/errors.hpp"
#include "segdoctor/kernels/kernels.hpp"

namespace segdoctor {

namespace {

// im2col for stride-1 convs. Writes (in_ch*k*k) x (h*w), pad zeros outside.
template <typename T>
void im2col(const Array4D<T>& x, int n, int ksize, int pad, T* col) {
  const int C = x.c(), H = x.h(), W = x.w();
  T* out = col;
  for (int c = 0; c < C; ++c)
    for (int ky = 0; ky < ksize; ++ky)
      for (int kx = 0; kx < ksize; ++kx) {
        const T* plane = x.plane(n, c);
        for (int y = 0; y < H; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= H) {
            for (int xx = 0; xx < W; ++xx) *out++ = T(0);
            continue;
          }
          const T* row = plane + static_cast<size_t>(sy) * W;
          for (int xx = 0; xx < W; ++xx) {
            const int sx = xx + kx - pad;
            *out++ = (sx < 0 || sx >= W) ? T(0) : row[sx];
          }
        }
      }
}

// scatter-add the columnized gradient back onto the input image
template <typename T>
void col2im(const T* col, int ksize, int pad, Array4D<T>& dx, int n) {
  const int C = dx.c(), H = dx.h(), W = dx.w();
  const T* in = col;
  for (int c = 0; c < C; ++c)
    for (int ky = 0; ky < ksize; ++ky)
      for (int kx = 0; kx < ksize; ++kx) {
        T* plane = dx.plane(n, c);
        for (int y = 0; y < H; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= H) {
            in += W;
            continue;
          }
          T* row = plane + static_cast<size_t>(sy) * W;
          for (int xx = 0; xx < W; ++xx) {
            const int sx = xx + kx - pad;
            if (sx >= 0 && sx < W) row[sx] += *in;
            ++in;
          }
        }
      }
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(std::string name, int in_ch, int out_ch, int ksize,
                  bool with_bias, Rng& rng)
    : name_(std::move(name)), in_ch_(in_ch), out_ch_(out_ch), ksize_(ksize),
      pad_(ksize == 3 ? 1 : 0) {
  check(in_ch >= 1 && out_ch >= 1, "Conv2d: channel counts must be >= 1");
  check(ksize == 1 || ksize == 3, "Conv2d: only 1x1 and 3x3 kernels");
  const size_t wn = static_cast<size_t>(out_ch) * in_ch * ksize * ksize;
  weight_.resize(wn);
  wgrad_.assign(wn, T(0));
  const double stddev = std::sqrt(2.0 / (in_ch * ksize * ksize));
  for (auto& w : weight_) w = static_cast<T>(rng.normal(0.0, stddev));
  if (with_bias) {
    bias_.assign(out_ch, T(0));
    bgrad_.assign(out_ch, T(0));
  }
}

template <typename T>
Array4D<T> Conv2d<T>::forward(const Array4D<T>& x) {
  check(x.c() == in_ch_, "Conv2d " + name_ + ": expected " +
                             std::to_string(in_ch_) + " channels, got " +
                             std::to_string(x.c()));
  const int N = x.n(), H = x.h(), W = x.w();
  const int ck = in_ch_ * ksize_ * ksize_;
  const int hw = H * W;
  x_ = x;
  Array4D<T> y(N, out_ch_, H, W);
  col_.resize(static_cast<size_t>(ck) * hw);
  for (int n = 0; n < N; ++n) {
    const T* col;
    if (ksize_ == 1) {
      col = x.plane(n, 0);  // 1x1: the input already is the column matrix
    } else {
      im2col(x, n, ksize_, pad_, col_.data());
      col = col_.data();
    }
    kernels::gemm_nn(out_ch_, hw, ck, T(1), weight_.data(), ck, col, hw, T(0),
                     y.plane(n, 0), hw);
    if (!bias_.empty())
      for (int c = 0; c < out_ch_; ++c) {
        T* plane = y.plane(n, c);
        const T b = bias_[c];
        for (int i = 0; i < hw; ++i) plane[i] += b;
      }
  }
  return y;
}

template <typename T>
Array4D<T> Conv2d<T>::backward(const Array4D<T>& dy) {
  const int N = x_.n(), H = x_.h(), W = x_.w();
  check(dy.n() == N && dy.c() == out_ch_ && dy.h() == H && dy.w() == W,
        "Conv2d " + name_ + ": gradient shape mismatch");
  const int ck = in_ch_ * ksize_ * ksize_;
  const int hw = H * W;
  Array4D<T> dx(N, in_ch_, H, W, T(0));
  std::vector<T> dcol(ksize_ == 1 ? 0 : static_cast<size_t>(ck) * hw);
  for (int n = 0; n < N; ++n) {
    const T* col;
    if (ksize_ == 1) {
      col = x_.plane(n, 0);
    } else {
      im2col(x_, n, ksize_, pad_, col_.data());
      col = col_.data();
    }
    // dW += dY * col^T
    kernels::gemm_nt(out_ch_, ck, hw, T(1), dy.plane(n, 0), hw, col, hw, T(1),
                     wgrad_.data(), ck);
    // dcol = W^T * dY
    if (ksize_ == 1) {
      kernels::gemm_tn(ck, hw, out_ch_, T(1), weight_.data(), ck,
                       dy.plane(n, 0), hw, T(1), dx.plane(n, 0), hw);
    } else {
      kernels::gemm_tn(ck, hw, out_ch_, T(1), weight_.data(), ck,
                       dy.plane(n, 0), hw, T(0), dcol.data(), hw);
      col2im(dcol.data(), ksize_, pad_, dx, n);
    }
    if (!bias_.empty())
      for (int c = 0; c < out_ch_; ++c)
        bgrad_[c] += kernels::sum(static_cast<size_t>(hw), dy.plane(n, c));
  }
  return dx;
}

template <typename T>
void Conv2d<T>::collect_params(std::vector<ParamView<T>>& out) {
  out.push_back({name_ + ".weight", weight_.data(), wgrad_.data(),
                 weight_.size()});
  if (!bias_.empty())
    out.push_back({name_ + ".bias", bias_.data(), bgrad_.data(), bias_.size()});
}

template <typename T>
void Conv2d<T>::zero_grads() {
  std::fill(wgrad_.begin(), wgrad_.end(), T(0));
  std::fill(bgrad_.begin(), bgrad_.end(), T(0));
}

// ------------------------------------------------------------ BatchNorm2d

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::string name, int channels, T momentum, T eps)
    : name_(std::move(name)), ch_(channels), momentum_(momentum), eps_(eps),
      gamma_(channels, T(1)), beta_(channels, T(0)), ggrad_(channels, T(0)),
      bgrad_(channels, T(0)), running_mean_(channels, T(0)),
      running_var_(channels, T(1)), inv_std_(channels, T(0)) {
  check(channels >= 1, "BatchNorm2d: channels must be >= 1");
}

template <typename T>
Array4D<T> BatchNorm2d<T>::forward(const Array4D<T>& x, bool train) {
  check(x.c() == ch_, "BatchNorm2d " + name_ + ": channel mismatch");
  const int N = x.n(), H = x.h(), W = x.w();
  const size_t cnt = static_cast<size_t>(N) * H * W;
  Array4D<T> y(N, ch_, H, W);
  xhat_ = Array4D<T>(N, ch_, H, W);
  last_train_ = train;

  for (int c = 0; c < ch_; ++c) {
    double mean, var;
    if (train) {
      double s = 0;
      for (int n = 0; n < N; ++n)
        s += kernels::sum(static_cast<size_t>(H) * W, x.plane(n, c));
      mean = s / static_cast<double>(cnt);
      double ss = 0;
      for (int n = 0; n < N; ++n)
        ss += kernels::sumsq_centered(static_cast<size_t>(H) * W, x.plane(n, c),
                                      static_cast<T>(mean));
      var = ss / static_cast<double>(cnt);  // biased, used for normalization
      const double unbiased =
          cnt > 1 ? ss / static_cast<double>(cnt - 1) : var;
      running_mean_[c] = static_cast<T>((1.0 - momentum_) * running_mean_[c] +
                                        momentum_ * mean);
      running_var_[c] = static_cast<T>((1.0 - momentum_) * running_var_[c] +
                                       momentum_ * unbiased);
    } else {
      mean = running_mean_[c];
      var = running_var_[c];
    }
    const double istd = 1.0 / std::sqrt(var + static_cast<double>(eps_));
    inv_std_[c] = static_cast<T>(istd);
    const T g = gamma_[c], b = beta_[c];
    for (int n = 0; n < N; ++n) {
      const T* xp = x.plane(n, c);
      T* hp = xhat_.plane(n, c);
      T* yp = y.plane(n, c);
      for (size_t i = 0; i < static_cast<size_t>(H) * W; ++i) {
        const T h = static_cast<T>((xp[i] - mean) * istd);
        hp[i] = h;
        yp[i] = g * h + b;
      }
    }
  }
  return y;
}

template <typename T>
Array4D<T> BatchNorm2d<T>::backward(const Array4D<T>& dy) {
  check(dy.same_shape(xhat_), "BatchNorm2d " + name_ + ": gradient shape");
  const int N = dy.n(), H = dy.h(), W = dy.w();
  const size_t cnt = static_cast<size_t>(N) * H * W;
  Array4D<T> dx(N, ch_, H, W);
  for (int c = 0; c < ch_; ++c) {
    double ds = 0, dss = 0;
    for (int n = 0; n < N; ++n) {
      const T* dp = dy.plane(n, c);
      const T* hp = xhat_.plane(n, c);
      ds += kernels::sum(static_cast<size_t>(H) * W, dp);
      dss += kernels::dot(static_cast<size_t>(H) * W, dp, hp);
    }
    ggrad_[c] += static_cast<T>(dss);
    bgrad_[c] += static_cast<T>(ds);
    const double g_istd = static_cast<double>(gamma_[c]) * inv_std_[c];
    if (last_train_) {
      const double mean_d = ds / static_cast<double>(cnt);
      const double mean_dh = dss / static_cast<double>(cnt);
      for (int n = 0; n < N; ++n) {
        const T* dp = dy.plane(n, c);
        const T* hp = xhat_.plane(n, c);
        T* op = dx.plane(n, c);
        for (size_t i = 0; i < static_cast<size_t>(H) * W; ++i)
          op[i] = static_cast<T>(g_istd * (dp[i] - mean_d - hp[i] * mean_dh));
      }
    } else {
      // running statistics are constants in eval mode
      for (int n = 0; n < N; ++n) {
        const T* dp = dy.plane(n, c);
        T* op = dx.plane(n, c);
        for (size_t i = 0; i < static_cast<size_t>(H) * W; ++i)
          op[i] = static_cast<T>(g_istd * dp[i]);
      }
    }
  }
  return dx;
}

template <typename T>
void BatchNorm2d<T>::collect_params(std::vector<ParamView<T>>& out) {
  out.push_back({name_ + ".gamma", gamma_.data(), ggrad_.data(), gamma_.size()});
  out.push_back({name_ + ".beta", beta_.data(), bgrad_.data(), beta_.size()});
}

template <typename T>
void BatchNorm2d<T>::zero_grads() {
  std::fill(ggrad_.begin(), ggrad_.end(), T(0));
  std::fill(bgrad_.begin(), bgrad_.end(), T(0));
}

// ------------------------------------------------------------------ ReLU

template <typename T>
Array4D<T> ReLU<T>::forward(const Array4D<T>& x) {
  x_ = x;
  Array4D<T> y(x.n(), x.c(), x.h(), x.w());
  kernels::relu_forward(x.size(), x.data(), y.data());
  return y;
}

template <typename T>
Array4D<T> ReLU<T>::backward(const Array4D<T>& dy) {
  check(dy.same_shape(x_), "ReLU: gradient shape mismatch");
  Array4D<T> dx(dy.n(), dy.c(), dy.h(), dy.w());
  kernels::relu_backward(dy.size(), x_.data(), dy.data(), dx.data());
  return dx;
}

// -------------------------------------------------------------- MaxPool2

template <typename T>
Array4D<T> MaxPool2<T>::forward(const Array4D<T>& x) {
  check(x.h() % 2 == 0 && x.w() % 2 == 0,
        "MaxPool2: input extent must be even, got " + x.shape_str());
  const int N = x.n(), C = x.c(), OH = x.h() / 2, OW = x.w() / 2;
  in_h_ = x.h();
  in_w_ = x.w();
  Array4D<T> y(N, C, OH, OW);
  argmax_ = Array4D<uint8_t>(N, C, OH, OW);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox) {
          T best = x(n, c, 2 * oy, 2 * ox);
          int arg = 0, idx = 0;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx, ++idx) {
              const T v = x(n, c, 2 * oy + dy, 2 * ox + dx);
              if (v > best) {  // strict: first max wins ties
                best = v;
                arg = idx;
              }
            }
          y(n, c, oy, ox) = best;
          argmax_(n, c, oy, ox) = static_cast<uint8_t>(arg);
        }
  return y;
}

template <typename T>
Array4D<T> MaxPool2<T>::backward(const Array4D<T>& dy) {
  check(dy.n() == argmax_.n() && dy.c() == argmax_.c() &&
            dy.h() == argmax_.h() && dy.w() == argmax_.w(),
        "MaxPool2: gradient shape mismatch");
  Array4D<T> dx(dy.n(), dy.c(), in_h_, in_w_, T(0));
  for (int n = 0; n < dy.n(); ++n)
    for (int c = 0; c < dy.c(); ++c)
      for (int oy = 0; oy < dy.h(); ++oy)
        for (int ox = 0; ox < dy.w(); ++ox) {
          const int arg = argmax_(n, c, oy, ox);
          dx(n, c, 2 * oy + arg / 2, 2 * ox + arg % 2) += dy(n, c, oy, ox);
        }
  return dx;
}

// ------------------------------------------------------ BilinearUpsample

template <typename T>
BilinearUpsample<T>::BilinearUpsample(int target_h, int target_w)
    : th_(target_h), tw_(target_w) {
  check(target_h >= 1 && target_w >= 1,
        "BilinearUpsample: target extent must be >= 1");
}

namespace {

// half-pixel source position, clamped; returns floor index and fraction
inline void src_pos(int t, int src, int dst, int* i0, int* i1, double* frac) {
  double p = (t + 0.5) * static_cast<double>(src) / dst - 0.5;
  if (p < 0) p = 0;
  if (p > src - 1) p = src - 1;
  *i0 = static_cast<int>(p);
  *i1 = std::min(*i0 + 1, src - 1);
  *frac = p - *i0;
}

}  // namespace

template <typename T>
Array4D<T> BilinearUpsample<T>::forward(const Array4D<T>& x) {
  const int N = x.n(), C = x.c(), H = x.h(), W = x.w();
  in_h_ = H;
  in_w_ = W;
  Array4D<T> y(N, C, th_, tw_);
  for (int ty = 0; ty < th_; ++ty) {
    int y0, y1;
    double fy;
    src_pos(ty, H, th_, &y0, &y1, &fy);
    for (int tx = 0; tx < tw_; ++tx) {
      int x0, x1;
      double fx;
      src_pos(tx, W, tw_, &x0, &x1, &fx);
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          const double v =
              (1 - fy) * ((1 - fx) * x(n, c, y0, x0) + fx * x(n, c, y0, x1)) +
              fy * ((1 - fx) * x(n, c, y1, x0) + fx * x(n, c, y1, x1));
          y(n, c, ty, tx) = static_cast<T>(v);
        }
    }
  }
  return y;
}

template <typename T>
Array4D<T> BilinearUpsample<T>::backward(const Array4D<T>& dy) {
  check(dy.h() == th_ && dy.w() == tw_,
        "BilinearUpsample: gradient extent mismatch");
  Array4D<T> dx(dy.n(), dy.c(), in_h_, in_w_, T(0));
  for (int ty = 0; ty < th_; ++ty) {
    int y0, y1;
    double fy;
    src_pos(ty, in_h_, th_, &y0, &y1, &fy);
    for (int tx = 0; tx < tw_; ++tx) {
      int x0, x1;
      double fx;
      src_pos(tx, in_w_, tw_, &x0, &x1, &fx);
      for (int n = 0; n < dy.n(); ++n)
        for (int c = 0; c < dy.c(); ++c) {
          const double d = dy(n, c, ty, tx);
          dx(n, c, y0, x0) += static_cast<T>((1 - fy) * (1 - fx) * d);
          dx(n, c, y0, x1) += static_cast<T>((1 - fy) * fx * d);
          dx(n, c, y1, x0) += static_cast<T>(fy * (1 - fx) * d);
          dx(n, c, y1, x1) += static_cast<T>(fy * fx * d);
        }
    }
  }
  return dx;
}

// ------------------------------------------------- SoftmaxCrossEntropy

template <typename T>
SoftmaxCeResult<T> SoftmaxCrossEntropy<T>::forward(const Array4D<T>& logits,
                                                   const LabelMap& labels) {
  const int N = logits.n(), K = logits.c(), H = logits.h(), W = logits.w();
  check(labels.n() == N && labels.h() == H && labels.w() == W,
        "SoftmaxCrossEntropy: labels must match logits, got labels (" +
            std::to_string(labels.h()) + "x" + std::to_string(labels.w()) +
            ") vs logits (" + std::to_string(H) + "x" + std::to_string(W) +
            ")");
  check(labels.num_classes() == K,
        "SoftmaxCrossEntropy: num_classes " +
            std::to_string(labels.num_classes()) + " != logit channels " +
            std::to_string(K));
  labels_ = labels;
  probs_ = Array4D<T>(N, K, H, W);
  double loss_sum = 0;
  nv_ = 0;
  for (int n = 0; n < N; ++n)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double mx = logits(n, 0, y, x);
        for (int k = 1; k < K; ++k)
          mx = std::max(mx, static_cast<double>(logits(n, k, y, x)));
        double sum = 0;
        for (int k = 0; k < K; ++k)
          sum += std::exp(static_cast<double>(logits(n, k, y, x)) - mx);
        const double lse = mx + std::log(sum);
        for (int k = 0; k < K; ++k)
          probs_(n, k, y, x) = static_cast<T>(
              std::exp(static_cast<double>(logits(n, k, y, x)) - lse));
        if (!labels.is_ignore(n, y, x)) {
          // loss = lse - logit[target]; exact even when probs underflow
          loss_sum += lse - logits(n, labels.at(n, y, x), y, x);
          ++nv_;
        }
      }
  SoftmaxCeResult<T> out;
  out.contributing_pixels = nv_;
  out.value = nv_ > 0 ? static_cast<T>(loss_sum / static_cast<double>(nv_))
                      : T(0);
  return out;
}

template <typename T>
Array4D<T> SoftmaxCrossEntropy<T>::backward() const {
  const int N = probs_.n(), K = probs_.c(), H = probs_.h(), W = probs_.w();
  Array4D<T> dl(N, K, H, W, T(0));
  if (nv_ == 0) return dl;
  const T inv = static_cast<T>(1.0 / static_cast<double>(nv_));
  for (int n = 0; n < N; ++n)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        if (labels_.is_ignore(n, y, x)) continue;
        const int32_t t = labels_.at(n, y, x);
        for (int k = 0; k < K; ++k) {
          T v = probs_(n, k, y, x);
          if (k == t) v -= T(1);
          dl(n, k, y, x) = v * inv;
        }
      }
  return dl;
}

// -------------------------------------------------------- concat / split

template <typename T>
Array4D<T> concat_channels(const Array4D<T>& a, const Array4D<T>& b) {
  check(a.n() == b.n() && a.h() == b.h() && a.w() == b.w(),
        "concat_channels: spatial shapes differ: " + a.shape_str() + " vs " +
            b.shape_str());
  Array4D<T> out(a.n(), a.c() + b.c(), a.h(), a.w());
  const size_t hw = static_cast<size_t>(a.h()) * a.w();
  for (int n = 0; n < a.n(); ++n) {
    for (int c = 0; c < a.c(); ++c)
      std::copy(a.plane(n, c), a.plane(n, c) + hw, out.plane(n, c));
    for (int c = 0; c < b.c(); ++c)
      std::copy(b.plane(n, c), b.plane(n, c) + hw, out.plane(n, a.c() + c));
  }
  return out;
}

template <typename T>
void split_channels(const Array4D<T>& d, int c_a, Array4D<T>& da,
                    Array4D<T>& db) {
  check(c_a >= 1 && c_a < d.c(), "split_channels: bad split point");
  da = Array4D<T>(d.n(), c_a, d.h(), d.w());
  db = Array4D<T>(d.n(), d.c() - c_a, d.h(), d.w());
  const size_t hw = static_cast<size_t>(d.h()) * d.w();
  for (int n = 0; n < d.n(); ++n) {
    for (int c = 0; c < c_a; ++c)
      std::copy(d.plane(n, c), d.plane(n, c) + hw, da.plane(n, c));
    for (int c = c_a; c < d.c(); ++c)
      std::copy(d.plane(n, c), d.plane(n, c) + hw, db.plane(n, c - c_a));
  }
}

// ------------------------------------------------------------ ConvBnRelu

template <typename T>
ConvBnRelu<T>::ConvBnRelu(const std::string& name, int in_ch, int out_ch,
                          int ksize, Rng& rng)
    : conv_(name + ".conv", in_ch, out_ch, ksize, /*with_bias=*/false, rng),
      bn_(name + ".bn", out_ch) {}

template <typename T>
Array4D<T> ConvBnRelu<T>::forward(const Array4D<T>& x, bool train) {
  return relu_.forward(bn_.forward(conv_.forward(x), train));
}

template <typename T>
Array4D<T> ConvBnRelu<T>::backward(const Array4D<T>& dy) {
  return conv_.backward(bn_.backward(relu_.backward(dy)));
}

template <typename T>
void ConvBnRelu<T>::collect_params(std::vector<ParamView<T>>& out) {
  conv_.collect_params(out);
  bn_.collect_params(out);
}

template <typename T>
void ConvBnRelu<T>::zero_grads() {
  conv_.zero_grads();
  bn_.zero_grads();
}

#define SEGDOCTOR_INSTANTIATE_LAYERS(T)                                        \
  template class Conv2d<T>;                                                    \
  template class BatchNorm2d<T>;                                               \
  template class ReLU<T>;                                                      \
  template class MaxPool2<T>;                                                  \
  template class BilinearUpsample<T>;                                          \
  template class SoftmaxCrossEntropy<T>;                                       \
  template class ConvBnRelu<T>;                                                \
  template Array4D<T> concat_channels(const Array4D<T>&, const Array4D<T>&);   \
  template void split_channels(const Array4D<T>&, int, Array4D<T>&,            \
                               Array4D<T>&);

SEGDOCTOR_INSTANTIATE_LAYERS(float)
SEGDOCTOR_INSTANTIATE_LAYERS(double)

}  // namespace segdoctor
