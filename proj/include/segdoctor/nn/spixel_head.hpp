#pragma once

// Auxiliary association head for the superpixel branch: three 3x3
// conv-bn-relu stages of hidden width 64 run at the shallow tap's
// resolution, bilinear upsampling to the input resolution, then a 1x1
// projection to the 9 association logit channels.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segdoctor/nn/layers.hpp"

namespace segdoctor {

template <typename T>
class SpixelHead {
 public:
  static constexpr int kHiddenWidth = 64;
  static constexpr int kLogitChannels = 9;

  SpixelHead(std::string name, int in_channels, uint64_t seed);

  // tap -> association logits at (out_h, out_w), normally tap extent x stride
  Array4D<T> forward(const Array4D<T>& tap, int out_h, int out_w, bool train);
  Array4D<T> backward(const Array4D<T>& dlogits);  // returns d(tap)

  void collect_params(std::vector<ParamView<T>>& out);
  void collect_state(std::vector<ParamView<T>>& out);
  void zero_grads();
  size_t num_params();
  int in_channels() const { return in_ch_; }
  const std::string& name() const { return name_; }

 private:
  SpixelHead(std::string name, int in_channels, Rng rng);

  std::string name_;
  int in_ch_;
  ConvBnRelu<T> c1_, c2_, c3_;
  std::optional<BilinearUpsample<T>> up_;
  Conv2d<T> proj_;
};

}  // namespace segdoctor
