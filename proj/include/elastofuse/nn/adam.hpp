#pragma once

#include <cmath>
#include <vector>

#include "elastofuse/nn/layers.hpp"

namespace elastofuse::nn {

/// Adaptive-moment optimizer over the trainable parameters it was given.
/// Frozen parameters are never touched.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (Parameter* p : params_) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

  void zero_grad() {
    for (Parameter* p : params_) p->zero_grad();
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Parameter* p = params_[i];
      if (!p->trainable || !p->grad.same_shape(p->value)) continue;
      float* w = p->value.data();
      const float* g = p->grad.data();
      float* m = m_[i].data();
      float* v = v_[i].data();
      const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
      for (std::int64_t j = 0; j < p->value.numel(); ++j) {
        m[j] = b1 * m[j] + (1.0f - b1) * g[j];
        v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        w[j] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  std::size_t parameter_count() const { return params_.size(); }

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace elastofuse::nn
