#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "elastofuse/rng.hpp"
#include "elastofuse/tensor.hpp"

namespace elastofuse::nn {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  void ensure_grad() {
    if (!grad.same_shape(value)) grad = Tensor(value.shape());
  }
  void zero_grad() {
    if (grad.same_shape(value)) grad.fill(0.0f);
  }
};

/// Named view over every tensor a module owns: parameters and buffers.
/// Checkpoints and best-epoch snapshots serialize exactly this set.
using StateMap = std::vector<std::pair<std::string, Tensor*>>;

void kaiming_normal(Tensor& w, int fan_in, Rng& rng);
void normal_init(Tensor& w, float stddev, Rng& rng);

/// 2-D convolution, NCHW, square kernels. Forward caches the input batch;
/// backward accumulates parameter gradients and optionally returns the input
/// gradient.
class Conv2d {
 public:
  Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad,
         bool with_bias);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy, bool need_dx);
  void init(Rng& rng);
  int out_size(int in) const { return (in + 2 * pad_ - kernel_) / stride_ + 1; }

  Parameter weight;  // [out, in, k, k]
  Parameter bias;    // [out]; empty when bias disabled
  bool has_bias() const { return has_bias_; }
  int in_channels() const { return in_ch_; }
  int out_channels() const { return out_ch_; }
  int kernel() const { return kernel_; }

  /// Replaces the kernel with one accepting new_in input channels; extra
  /// slices are prepended at channel 0.
  void set_input_channels(int new_in, const Tensor& new_weight);

 private:
  int in_ch_, out_ch_, kernel_, stride_, pad_;
  bool has_bias_;
  Tensor cached_x_;
  std::vector<int> in_shape_;
};

class Linear {
 public:
  Linear(std::string name, int in_features, int out_features);

  Tensor forward(const Tensor& x);  // x: [N, in]
  Tensor backward(const Tensor& dy, bool need_dx);
  void init(Rng& rng);

  Parameter weight;  // [out, in]
  Parameter bias;    // [out]
  int in_features() const { return in_; }
  int out_features() const { return out_; }

 private:
  int in_, out_;
  Tensor cached_x_;
};

class ReLU {
 public:
  /// In-place when called with a temporary; keeps a byte mask for backward.
  Tensor forward(Tensor x);
  Tensor backward(const Tensor& dy) const;

 private:
  std::vector<std::uint8_t> mask_;
};

class MaxPool2d {
 public:
  MaxPool2d(int kernel, int stride, int pad = 0) : kernel_(kernel), stride_(stride), pad_(pad) {}
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy) const;
  int out_size(int in) const { return (in + 2 * pad_ - kernel_) / stride_ + 1; }

 private:
  int kernel_, stride_, pad_;
  std::vector<int> in_shape_;
  std::vector<std::int64_t> argmax_;
};

class AdaptiveAvgPool2d {
 public:
  AdaptiveAvgPool2d(int out_h, int out_w) : out_h_(out_h), out_w_(out_w) {}
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy) const;

 private:
  int out_h_, out_w_;
  std::vector<int> in_shape_;
};

/// Batch normalization over NCHW channels. Frozen groups keep using the
/// stored running statistics during training and never update them.
class BatchNorm2d {
 public:
  BatchNorm2d(std::string name, int channels);

  Tensor forward(const Tensor& x, bool training);
  Tensor backward(const Tensor& dy, bool need_dx);
  void init();

  Parameter gamma;
  Parameter beta;
  Tensor running_mean;
  Tensor running_var;
  bool frozen_stats = false;

  double momentum = 0.1;
  double eps = 1e-5;
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  int channels_;
  bool used_batch_stats_ = false;
  Tensor cached_xhat_;
  std::vector<float> cached_invstd_;
  std::vector<float> cached_mean_;
};

/// Row-wise softmax of a [N, K] tensor.
Tensor softmax_rows(const Tensor& logits);

/// Mean cross-entropy with integer labels; also emits d(loss)/d(logits).
/// Throws ModelError when the loss is not finite.
float cross_entropy(const Tensor& logits, const std::vector<int>& labels, Tensor* dlogits);

}  // namespace elastofuse::nn
