#pragma once

// SGD with momentum and L2 weight decay over a fixed parameter set, plus
// the per-epoch learning-rate schedules. The parameter views alias storage
// owned by the network/heads, so those objects must stay put while the
// optimizer lives.

#include <cmath>
#include <numbers>
#include <vector>

#include "segdoctor/core/errors.hpp"
#include "segdoctor/kernels/kernels.hpp"
#include "segdoctor/nn/layers.hpp"

namespace segdoctor {

// Cosine annealing from lr0 at epoch 0 down to 0 after the last epoch.
inline double cosine_lr(double lr0, int epoch, int total_epochs) {
  return 0.5 * lr0 *
         (1.0 + std::cos(std::numbers::pi * epoch / total_epochs));
}

template <typename T>
class SgdOptimizer {
 public:
  SgdOptimizer(std::vector<ParamView<T>> params, T momentum, T weight_decay)
      : params_(std::move(params)), momentum_(momentum), wd_(weight_decay) {
    velocity_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      check(params_[i].grad != nullptr,
            "optimizer: parameter '" + params_[i].name + "' has no gradient");
      velocity_[i].assign(params_[i].n, T(0));
    }
  }

  // v <- momentum*v + g + wd*p;  p <- p - lr*v
  void step(T lr) {
    for (size_t i = 0; i < params_.size(); ++i) {
      kernels::sgd_step(params_[i].n, params_[i].data, params_[i].grad,
                        velocity_[i].data(), lr, momentum_, wd_);
    }
  }

  size_t num_params() const {
    size_t n = 0;
    for (const ParamView<T>& p : params_) n += p.n;
    return n;
  }

 private:
  std::vector<ParamView<T>> params_;
  std::vector<std::vector<T>> velocity_;
  T momentum_, wd_;
};

}  // namespace segdoctor
