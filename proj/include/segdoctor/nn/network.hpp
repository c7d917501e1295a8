#pragma once

// Abstract segmentation network with named tap points. A tap is an internal
// activation the treatment losses read (as copies) and push gradients into
// (additively, during backward). Concrete networks publish their taps in a
// catalog of tag -> {channels, stride}.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "segdoctor/core/array4d.hpp"
#include "segdoctor/nn/layers.hpp"

namespace segdoctor {

struct TapInfo {
  int channels = 0;
  int stride = 0;
};

template <typename T>
class SegmentationNetwork {
 public:
  virtual ~SegmentationNetwork() = default;

  // Runs the network to logits. Every tag in `capture` is copied into
  // `captured` (tag -> activation snapshot); an unknown tag throws and the
  // error lists the catalog. Capture never alters the computed logits.
  virtual Array4D<T> forward(const Array4D<T>& x, bool train,
                             const std::vector<std::string>& capture,
                             std::map<std::string, Array4D<T>>* captured) = 0;

  // Backpropagates the logit gradient. `tap_grads` entries are added to the
  // gradient stream at the named tap points; shapes must match the last
  // forward. Parameter gradients accumulate.
  virtual void backward(
      const Array4D<T>& dlogits,
      const std::map<std::string, Array4D<T>>& tap_grads) = 0;

  virtual const std::map<std::string, TapInfo>& tap_catalog() const = 0;

  virtual void collect_params(std::vector<ParamView<T>>& out) = 0;
  // non-trainable buffers (normalization running statistics); grad is null
  virtual void collect_state(std::vector<ParamView<T>>& out) = 0;
  virtual void zero_grads() = 0;

  virtual int num_classes() const = 0;
  virtual int in_channels() const = 0;
  virtual const std::string& arch_name() const = 0;

  std::vector<std::string> available_taps() const {
    std::vector<std::string> tags;
    for (const auto& kv : tap_catalog()) tags.push_back(kv.first);
    return tags;
  }

  size_t num_params() {
    std::vector<ParamView<T>> views;
    collect_params(views);
    size_t total = 0;
    for (const auto& v : views) total += v.n;
    return total;
  }
};

}  // namespace segdoctor
