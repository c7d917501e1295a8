#pragma once

// Reference tiny UNet (~0.5M parameters). Four encoder stages of widths
// 16/32/64/128, each two 3x3 conv-bn-relu units followed by 2x2 max pooling;
// the decoder mirrors them, at each stage concatenating the pre-pool skip
// with the 2x upsampled previous output (skip channels first), ending in a
// 1x1 classifier. Output resolution equals input resolution; H and W must be
// divisible by 16.
//
// Tap points: "enc1".."enc4" are the post-pool encoder outputs (strides
// 2/4/8/16, channels 16/32/64/128); "dec1".."dec4" are the decoder stage
// outputs (strides 8/4/2/1, channels 64/32/16/16).

#include <array>
#include <cstdint>
#include <optional>

#include "segdoctor/nn/network.hpp"

namespace segdoctor {

template <typename T>
class ReferenceUNet : public SegmentationNetwork<T> {
 public:
  // Construction is fully determined by (num_classes, in_channels, seed).
  ReferenceUNet(int num_classes, int in_channels, uint64_t seed);

  Array4D<T> forward(const Array4D<T>& x, bool train,
                     const std::vector<std::string>& capture,
                     std::map<std::string, Array4D<T>>* captured) override;
  void backward(const Array4D<T>& dlogits,
                const std::map<std::string, Array4D<T>>& tap_grads) override;

  const std::map<std::string, TapInfo>& tap_catalog() const override {
    return catalog_;
  }
  void collect_params(std::vector<ParamView<T>>& out) override;
  void collect_state(std::vector<ParamView<T>>& out) override;
  void zero_grads() override;

  int num_classes() const override { return k_; }
  int in_channels() const override { return in_ch_; }
  const std::string& arch_name() const override { return arch_; }
  uint64_t seed() const { return seed_; }

  static constexpr std::array<int, 4> kEncWidths = {16, 32, 64, 128};
  static constexpr std::array<int, 4> kDecWidths = {64, 32, 16, 16};

 private:
  struct EncStage {
    ConvBnRelu<T> a, b;
    MaxPool2<T> pool;
  };
  struct DecStage {
    std::optional<BilinearUpsample<T>> up;  // target set per forward
    ConvBnRelu<T> a, b;
  };

  int k_, in_ch_;
  uint64_t seed_;
  std::string arch_ = "reference-unet";
  std::vector<EncStage> enc_;
  std::vector<DecStage> dec_;
  std::optional<Conv2d<T>> final_;
  std::map<std::string, TapInfo> catalog_;
  // shapes captured at the taps on the last forward, for gradient injection
  std::map<std::string, std::array<int, 4>> tap_shapes_;

  void maybe_capture(const std::string& tag, const Array4D<T>& v,
                     const std::vector<std::string>& capture,
                     std::map<std::string, Array4D<T>>* captured);
  static void inject(const std::string& tag,
                     const std::map<std::string, Array4D<T>>& tap_grads,
                     Array4D<T>& g);
};

}  // namespace segdoctor
