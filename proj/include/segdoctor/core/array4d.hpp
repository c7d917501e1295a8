#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "segdoctor/core/errors.hpp"

namespace segdoctor {

// Dense NCHW container. This is deliberately not a tensor-algebra type;
// it only carries shape bookkeeping and contiguous storage.
template <typename T>
class Array4D {
 public:
  Array4D() = default;
  Array4D(int n, int c, int h, int w, T fill = T(0))
      : n_(n), c_(c), h_(h), w_(w),
        data_(static_cast<size_t>(n) * c * h * w, fill) {
    check(n >= 1 && c >= 1 && h >= 1 && w >= 1,
          "Array4D: all dimensions must be >= 1, got (" + std::to_string(n) +
              "," + std::to_string(c) + "," + std::to_string(h) + "," +
              std::to_string(w) + ")");
  }

  int n() const { return n_; }
  int c() const { return c_; }
  int h() const { return h_; }
  int w() const { return w_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool same_shape(const Array4D& o) const {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }
  std::string shape_str() const {
    return "(" + std::to_string(n_) + "," + std::to_string(c_) + "," +
           std::to_string(h_) + "," + std::to_string(w_) + ")";
  }

  T& operator()(int n, int c, int y, int x) {
    return data_[((static_cast<size_t>(n) * c_ + c) * h_ + y) * w_ + x];
  }
  const T& operator()(int n, int c, int y, int x) const {
    return data_[((static_cast<size_t>(n) * c_ + c) * h_ + y) * w_ + x];
  }

  // Pointer to the (n, c) plane, h*w contiguous elements.
  T* plane(int n, int c) {
    return data_.data() + (static_cast<size_t>(n) * c_ + c) * h_ * w_;
  }
  const T* plane(int n, int c) const {
    return data_.data() + (static_cast<size_t>(n) * c_ + c) * h_ * w_;
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T* begin() { return data_.data(); }
  T* end() { return data_.data() + data_.size(); }
  const T* begin() const { return data_.data(); }
  const T* end() const { return data_.data() + data_.size(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (const T& v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

 private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<T> data_;
};

}  // namespace segdoctor
