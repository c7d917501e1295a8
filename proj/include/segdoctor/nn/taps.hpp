#pragma once

// Tap attachment: binds a network's published tap points to declared roles
// (one deep tap for the category penalty, one or more shallow taps for the
// superpixel branch). Attachment validates tags, channels, and strides up
// front; every forward re-asserts the captured shapes. Capture is
// observationally transparent: logits are identical with and without taps.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "segdoctor/core/errors.hpp"
#include "segdoctor/nn/network.hpp"

namespace segdoctor {

enum class TapRole { kDeep, kShallow };

struct TapSpec {
  std::string layer_tag;
  TapRole role = TapRole::kShallow;
  int expected_channels = 0;
  int expected_stride = 0;
};

template <typename T>
struct TappedForward {
  Array4D<T> logits;
  std::map<std::string, Array4D<T>> taps;  // tag -> activation snapshot
};

template <typename T>
class TappedModel {
 public:
  TappedModel(std::unique_ptr<SegmentationNetwork<T>> net,
              std::vector<TapSpec> taps)
      : net_(std::move(net)), taps_(std::move(taps)) {
    check(net_ != nullptr, "TappedModel: null network");
    const auto& catalog = net_->tap_catalog();
    int deep = 0, shallow = 0;
    for (const auto& spec : taps_) {
      auto it = catalog.find(spec.layer_tag);
      if (it == catalog.end()) {
        std::string tags;
        for (const auto& kv : catalog) {
          if (!tags.empty()) tags += ", ";
          tags += kv.first;
        }
        throw ValidationError("TappedModel: unknown layer_tag '" +
                              spec.layer_tag + "'; available: " + tags);
      }
      check(spec.expected_channels == it->second.channels,
            "TappedModel: tap '" + spec.layer_tag + "' has " +
                std::to_string(it->second.channels) +
                " channels, spec expects " +
                std::to_string(spec.expected_channels));
      check(spec.expected_stride == it->second.stride,
            "TappedModel: tap '" + spec.layer_tag + "' has stride " +
                std::to_string(it->second.stride) + ", spec expects " +
                std::to_string(spec.expected_stride));
      if (spec.role == TapRole::kDeep) {
        ++deep;
        deep_ = &spec - taps_.data();
      } else {
        ++shallow;
      }
    }
    check(deep == 1, "TappedModel: exactly one deep tap required, got " +
                         std::to_string(deep));
    check(shallow >= 1, "TappedModel: at least one shallow tap required");
  }

  TappedForward<T> forward(const Array4D<T>& x, bool train) {
    std::vector<std::string> tags;
    for (const auto& spec : taps_) tags.push_back(spec.layer_tag);
    TappedForward<T> out;
    out.logits = net_->forward(x, train, tags, &out.taps);
    for (const auto& spec : taps_) {
      const Array4D<T>& got = out.taps.at(spec.layer_tag);
      check(got.c() == spec.expected_channels &&
                got.h() * spec.expected_stride == x.h() &&
                got.w() * spec.expected_stride == x.w(),
            "TappedModel: tap '" + spec.layer_tag + "' captured shape " +
                got.shape_str() + " violates its spec on input " +
                x.shape_str());
    }
    return out;
  }

  void backward(const Array4D<T>& dlogits,
                const std::map<std::string, Array4D<T>>& tap_grads) {
    net_->backward(dlogits, tap_grads);
  }

  const TapSpec& deep_tap() const { return taps_[deep_]; }
  std::vector<const TapSpec*> shallow_taps() const {
    std::vector<const TapSpec*> out;
    for (const auto& spec : taps_)
      if (spec.role == TapRole::kShallow) out.push_back(&spec);
    return out;
  }
  const std::vector<TapSpec>& taps() const { return taps_; }
  SegmentationNetwork<T>& network() { return *net_; }
  const SegmentationNetwork<T>& network() const { return *net_; }

 private:
  std::unique_ptr<SegmentationNetwork<T>> net_;
  std::vector<TapSpec> taps_;
  std::ptrdiff_t deep_ = -1;
};

}  // namespace segdoctor
