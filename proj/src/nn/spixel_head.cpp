#include "segdoctor/nn/spixel_head.hpp"

#include "segdoctor/core/errors.hpp"

namespace segdoctor {

template <typename T>
SpixelHead<T>::SpixelHead(std::string name, int in_channels, uint64_t seed)
    : SpixelHead(std::move(name), in_channels, Rng(seed)) {}

// rng is taken by value so the member initializers below can draw from one
// stream in declaration order
template <typename T>
SpixelHead<T>::SpixelHead(std::string name, int in_channels, Rng rng)
    : name_(std::move(name)), in_ch_(in_channels),
      c1_(name_ + ".c1", in_channels, kHiddenWidth, 3, rng),
      c2_(name_ + ".c2", kHiddenWidth, kHiddenWidth, 3, rng),
      c3_(name_ + ".c3", kHiddenWidth, kHiddenWidth, 3, rng),
      proj_(name_ + ".proj", kHiddenWidth, kLogitChannels, 1,
            /*with_bias=*/true, rng) {
  check(in_channels >= 1, "SpixelHead: in_channels must be >= 1");
}

template <typename T>
Array4D<T> SpixelHead<T>::forward(const Array4D<T>& tap, int out_h, int out_w,
                                  bool train) {
  check(tap.c() == in_ch_, "SpixelHead " + name_ + ": expected " +
                               std::to_string(in_ch_) + " channels, got " +
                               std::to_string(tap.c()));
  check(out_h >= 1 && out_w >= 1, "SpixelHead: output extent must be >= 1");
  Array4D<T> h = c3_.forward(c2_.forward(c1_.forward(tap, train), train),
                             train);
  up_.emplace(out_h, out_w);
  return proj_.forward(up_->forward(h));
}

template <typename T>
Array4D<T> SpixelHead<T>::backward(const Array4D<T>& dlogits) {
  check(up_.has_value(), "SpixelHead: backward before forward");
  Array4D<T> g = up_->backward(proj_.backward(dlogits));
  return c1_.backward(c2_.backward(c3_.backward(g)));
}

template <typename T>
void SpixelHead<T>::collect_params(std::vector<ParamView<T>>& out) {
  c1_.collect_params(out);
  c2_.collect_params(out);
  c3_.collect_params(out);
  proj_.collect_params(out);
}

template <typename T>
void SpixelHead<T>::collect_state(std::vector<ParamView<T>>& out) {
  for (BatchNorm2d<T>* bn : {&c1_.bn(), &c2_.bn(), &c3_.bn()}) {
    out.push_back({bn->name() + ".running_mean", bn->running_mean().data(),
                   nullptr, bn->running_mean().size()});
    out.push_back({bn->name() + ".running_var", bn->running_var().data(),
                   nullptr, bn->running_var().size()});
  }
}

template <typename T>
void SpixelHead<T>::zero_grads() {
  c1_.zero_grads();
  c2_.zero_grads();
  c3_.zero_grads();
  proj_.zero_grads();
}

template <typename T>
size_t SpixelHead<T>::num_params() {
  std::vector<ParamView<T>> views;
  collect_params(views);
  size_t total = 0;
  for (const auto& v : views) total += v.n;
  return total;
}

template class SpixelHead<float>;
template class SpixelHead<double>;

}  // namespace segdoctor
