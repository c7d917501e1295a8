#pragma once

// Hand-written layers in the classic forward/backward style. Each layer owns
// its parameters, gradients, and whatever it must remember from forward.
// Dtype is templated: float for training throughput, double for gradient
// checks.

#include <cstdint>
#include <string>
#include <vector>

#include "segdoctor/core/array4d.hpp"
#include "segdoctor/core/random.hpp"
#include "segdoctor/core/types.hpp"

namespace segdoctor {

// Named view over one parameter buffer and its gradient. The optimizer and
// the checkpoint writer both walk these.
template <typename T>
struct ParamView {
  std::string name;
  T* data = nullptr;
  T* grad = nullptr;
  size_t n = 0;
};

// 2D convolution, stride 1. ksize 3 uses pad 1 (same size), ksize 1 uses no
// padding. Weights are He-initialized from the given stream; bias optional.
template <typename T>
class Conv2d {
 public:
  Conv2d(std::string name, int in_ch, int out_ch, int ksize, bool with_bias,
         Rng& rng);

  Array4D<T> forward(const Array4D<T>& x);
  Array4D<T> backward(const Array4D<T>& dy);  // accumulates weight grads

  void collect_params(std::vector<ParamView<T>>& out);
  void zero_grads();
  size_t num_params() const { return weight_.size() + bias_.size(); }
  const std::string& name() const { return name_; }
  int in_channels() const { return in_ch_; }
  int out_channels() const { return out_ch_; }

 private:
  std::string name_;
  int in_ch_, out_ch_, ksize_, pad_;
  std::vector<T> weight_, wgrad_;  // (out, in, k, k)
  std::vector<T> bias_, bgrad_;    // (out) or empty
  Array4D<T> x_;                   // saved input
  std::vector<T> col_;             // im2col scratch, one image
};

// Batch normalization over (N, H, W) per channel. Normalization uses the
// biased batch variance; the running variance tracks the unbiased one.
template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d(std::string name, int channels, T momentum = T(0.1),
              T eps = T(1e-5));

  Array4D<T> forward(const Array4D<T>& x, bool train);
  Array4D<T> backward(const Array4D<T>& dy);

  void collect_params(std::vector<ParamView<T>>& out);
  // running statistics are state, not parameters; checkpointed separately
  std::vector<T>& running_mean() { return running_mean_; }
  std::vector<T>& running_var() { return running_var_; }
  void zero_grads();
  size_t num_params() const { return gamma_.size() + beta_.size(); }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  int ch_;
  T momentum_, eps_;
  std::vector<T> gamma_, beta_, ggrad_, bgrad_;
  std::vector<T> running_mean_, running_var_;
  // saved by forward for backward
  Array4D<T> xhat_;
  std::vector<T> inv_std_;
  bool last_train_ = true;
};

template <typename T>
class ReLU {
 public:
  Array4D<T> forward(const Array4D<T>& x);
  Array4D<T> backward(const Array4D<T>& dy);

 private:
  Array4D<T> x_;
};

// 2x2 max pooling, stride 2. Input extent must be even; ties resolve to the
// first maximum in row-major window order.
template <typename T>
class MaxPool2 {
 public:
  Array4D<T> forward(const Array4D<T>& x);
  Array4D<T> backward(const Array4D<T>& dy);

 private:
  int in_h_ = 0, in_w_ = 0;
  Array4D<uint8_t> argmax_;  // window-local index 0..3
};

// Bilinear resize to a fixed target extent (half-pixel center convention,
// edges clamped). No parameters; backward scatters with the same weights.
template <typename T>
class BilinearUpsample {
 public:
  BilinearUpsample(int target_h, int target_w);

  Array4D<T> forward(const Array4D<T>& x);
  Array4D<T> backward(const Array4D<T>& dy);

 private:
  int th_, tw_;
  int in_h_ = 0, in_w_ = 0;
};

// Softmax + cross-entropy over the channel axis, mean over non-ignore
// pixels. The gradient is (softmax - onehot) / Nv at contributing pixels.
template <typename T>
struct SoftmaxCeResult {
  T value = 0;
  int64_t contributing_pixels = 0;
};

template <typename T>
class SoftmaxCrossEntropy {
 public:
  SoftmaxCeResult<T> forward(const Array4D<T>& logits, const LabelMap& labels);
  Array4D<T> backward() const;  // wrt logits

  const Array4D<T>& probs() const { return probs_; }

 private:
  Array4D<T> probs_;
  LabelMap labels_;
  int64_t nv_ = 0;
};

// Channel concatenation (a first, then b) and the matching gradient split.
template <typename T>
Array4D<T> concat_channels(const Array4D<T>& a, const Array4D<T>& b);
template <typename T>
void split_channels(const Array4D<T>& d, int c_a, Array4D<T>& da,
                    Array4D<T>& db);

// conv(no bias) -> batchnorm -> relu, the standard encoder/decoder unit.
template <typename T>
class ConvBnRelu {
 public:
  ConvBnRelu(const std::string& name, int in_ch, int out_ch, int ksize,
             Rng& rng);

  Array4D<T> forward(const Array4D<T>& x, bool train);
  Array4D<T> backward(const Array4D<T>& dy);
  void collect_params(std::vector<ParamView<T>>& out);
  void zero_grads();
  BatchNorm2d<T>& bn() { return bn_; }

 private:
  Conv2d<T> conv_;
  BatchNorm2d<T> bn_;
  ReLU<T> relu_;
};

}  // namespace segdoctor
