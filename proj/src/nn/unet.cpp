#include "segdoctor/nn/unet.hpp"

#include <algorithm>

#include "segdoctor/core/errors.hpp"

namespace segdoctor {

namespace {

std::string join_tags(const std::map<std::string, TapInfo>& catalog) {
  std::string s;
  for (const auto& kv : catalog) {
    if (!s.empty()) s += ", ";
    s += kv.first;
  }
  return s;
}

template <typename T>
std::array<int, 4> shape_of(const Array4D<T>& a) {
  return {a.n(), a.c(), a.h(), a.w()};
}

}  // namespace

template <typename T>
ReferenceUNet<T>::ReferenceUNet(int num_classes, int in_channels,
                                uint64_t seed)
    : k_(num_classes), in_ch_(in_channels), seed_(seed) {
  check(num_classes >= 2, "ReferenceUNet: num_classes must be >= 2, got " +
                              std::to_string(num_classes));
  check(in_channels >= 1, "ReferenceUNet: in_channels must be >= 1");
  Rng rng(seed);

  enc_.reserve(4);
  int prev = in_channels;
  for (int i = 0; i < 4; ++i) {
    const int w = kEncWidths[i];
    const std::string tag = "enc" + std::to_string(i + 1);
    enc_.push_back(EncStage{ConvBnRelu<T>(tag + "a", prev, w, 3, rng),
                            ConvBnRelu<T>(tag + "b", w, w, 3, rng),
                            MaxPool2<T>()});
    catalog_[tag] = {w, 1 << (i + 1)};
    prev = w;
  }
  // decoder stage i consumes concat(skip from encoder stage 5-i, upsampled
  // previous); skip width equals the previous decoder input width mirror
  for (int i = 0; i < 4; ++i) {
    const int skip_w = kEncWidths[3 - i];
    const int in_w = skip_w + (i == 0 ? kEncWidths[3] : kDecWidths[i - 1]);
    const int w = kDecWidths[i];
    const std::string tag = "dec" + std::to_string(i + 1);
    dec_.push_back(DecStage{std::nullopt,
                            ConvBnRelu<T>(tag + "a", in_w, w, 3, rng),
                            ConvBnRelu<T>(tag + "b", w, w, 3, rng)});
    catalog_[tag] = {w, 1 << (3 - i)};
  }
  final_.emplace("final", kDecWidths[3], num_classes, 1, /*with_bias=*/true,
                 rng);
}

template <typename T>
void ReferenceUNet<T>::maybe_capture(
    const std::string& tag, const Array4D<T>& v,
    const std::vector<std::string>& capture,
    std::map<std::string, Array4D<T>>* captured) {
  tap_shapes_[tag] = shape_of(v);
  if (captured &&
      std::find(capture.begin(), capture.end(), tag) != capture.end())
    (*captured)[tag] = v;  // deliberate copy: a snapshot, not a view
}

template <typename T>
Array4D<T> ReferenceUNet<T>::forward(
    const Array4D<T>& x, bool train, const std::vector<std::string>& capture,
    std::map<std::string, Array4D<T>>* captured) {
  check(x.c() == in_ch_, "ReferenceUNet: expected " + std::to_string(in_ch_) +
                             " input channels, got " + std::to_string(x.c()));
  check(x.h() % 16 == 0 && x.w() % 16 == 0,
        "ReferenceUNet: input extent must be divisible by 16, got " +
            x.shape_str() + "; pad the image up to the next multiple of 16");
  for (const auto& tag : capture)
    check(catalog_.count(tag) == 1,
          "ReferenceUNet: unknown tap '" + tag + "'; available: " +
              join_tags(catalog_));
  if (captured) captured->clear();
  tap_shapes_.clear();

  std::vector<Array4D<T>> skips;  // pre-pool activations, stages 1..4
  skips.reserve(4);
  Array4D<T> cur = x;
  for (int i = 0; i < 4; ++i) {
    Array4D<T> s = enc_[i].b.forward(enc_[i].a.forward(cur, train), train);
    cur = enc_[i].pool.forward(s);
    skips.push_back(std::move(s));
    maybe_capture("enc" + std::to_string(i + 1), cur, capture, captured);
  }
  for (int i = 0; i < 4; ++i) {
    const Array4D<T>& skip = skips[3 - i];
    dec_[i].up.emplace(skip.h(), skip.w());
    Array4D<T> cat = concat_channels(skip, dec_[i].up->forward(cur));
    cur = dec_[i].b.forward(dec_[i].a.forward(cat, train), train);
    maybe_capture("dec" + std::to_string(i + 1), cur, capture, captured);
  }
  return final_->forward(cur);
}

template <typename T>
void ReferenceUNet<T>::inject(
    const std::string& tag,
    const std::map<std::string, Array4D<T>>& tap_grads, Array4D<T>& g) {
  auto it = tap_grads.find(tag);
  if (it == tap_grads.end()) return;
  check(it->second.same_shape(g),
        "ReferenceUNet: tap gradient for '" + tag + "' has shape " +
            it->second.shape_str() + ", expected " + g.shape_str());
  const T* src = it->second.data();
  T* dst = g.data();
  for (size_t i = 0; i < g.size(); ++i) dst[i] += src[i];
}

template <typename T>
void ReferenceUNet<T>::backward(
    const Array4D<T>& dlogits,
    const std::map<std::string, Array4D<T>>& tap_grads) {
  check(!tap_shapes_.empty(), "ReferenceUNet: backward before forward");
  for (const auto& kv : tap_grads)
    check(catalog_.count(kv.first) == 1,
          "ReferenceUNet: unknown tap '" + kv.first + "' in gradient map; "
          "available: " + join_tags(catalog_));

  Array4D<T> g = final_->backward(dlogits);
  std::vector<Array4D<T>> skip_grads(4);  // indexed by encoder stage 0..3
  for (int i = 3; i >= 0; --i) {
    inject("dec" + std::to_string(i + 1), tap_grads, g);
    Array4D<T> dcat = dec_[i].a.backward(dec_[i].b.backward(g));
    const int skip_ch = kEncWidths[3 - i];
    Array4D<T> dup;
    split_channels(dcat, skip_ch, skip_grads[3 - i], dup);
    g = dec_[i].up->backward(dup);
  }
  for (int i = 3; i >= 0; --i) {
    inject("enc" + std::to_string(i + 1), tap_grads, g);
    Array4D<T> ds = enc_[i].pool.backward(g);
    const T* add = skip_grads[i].data();
    T* dst = ds.data();
    for (size_t j = 0; j < ds.size(); ++j) dst[j] += add[j];
    g = enc_[i].a.backward(enc_[i].b.backward(ds));
  }
  // g now holds the input-image gradient, which nothing consumes
}

template <typename T>
void ReferenceUNet<T>::collect_params(std::vector<ParamView<T>>& out) {
  for (auto& st : enc_) {
    st.a.collect_params(out);
    st.b.collect_params(out);
  }
  for (auto& st : dec_) {
    st.a.collect_params(out);
    st.b.collect_params(out);
  }
  final_->collect_params(out);
}

template <typename T>
void ReferenceUNet<T>::collect_state(std::vector<ParamView<T>>& out) {
  auto add = [&out](BatchNorm2d<T>& bn) {
    out.push_back({bn.name() + ".running_mean", bn.running_mean().data(),
                   nullptr, bn.running_mean().size()});
    out.push_back({bn.name() + ".running_var", bn.running_var().data(),
                   nullptr, bn.running_var().size()});
  };
  for (auto& st : enc_) {
    add(st.a.bn());
    add(st.b.bn());
  }
  for (auto& st : dec_) {
    add(st.a.bn());
    add(st.b.bn());
  }
}

template <typename T>
void ReferenceUNet<T>::zero_grads() {
  for (auto& st : enc_) {
    st.a.zero_grads();
    st.b.zero_grads();
  }
  for (auto& st : dec_) {
    st.a.zero_grads();
    st.b.zero_grads();
  }
  final_->zero_grads();
}

template class ReferenceUNet<float>;
template class ReferenceUNet<double>;

}  // namespace segdoctor
