#include "elastofuse/nn/layers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "elastofuse/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace elastofuse::nn {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void kaiming_normal(Tensor& w, int fan_in, Rng& rng) {
  const float stddev = std::sqrt(2.0f / static_cast<float>(fan_in));
  for (std::int64_t i = 0; i < w.numel(); ++i)
    w[i] = static_cast<float>(rng.normal(0.0, stddev));
}

void normal_init(Tensor& w, float stddev, Rng& rng) {
  for (std::int64_t i = 0; i < w.numel(); ++i)
    w[i] = static_cast<float>(rng.normal(0.0, stddev));
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad,
               bool with_bias)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad),
      has_bias_(with_bias) {
  weight.name = name + ".weight";
  weight.value = Tensor({out_ch, in_ch, kernel, kernel});
  if (with_bias) {
    bias.name = name + ".bias";
    bias.value = Tensor({out_ch});
  }
}

void Conv2d::init(Rng& rng) {
  kaiming_normal(weight.value, in_ch_ * kernel_ * kernel_, rng);
  if (has_bias_) bias.value.fill(0.0f);
}

void Conv2d::set_input_channels(int new_in, const Tensor& new_weight) {
  in_ch_ = new_in;
  weight.value = new_weight;
  weight.grad = Tensor();
}

namespace {

// col layout: [Cin*k*k, Ho*Wo]
void im2col(const float* x, int C, int H, int W, int k, int stride, int pad, int Ho, int Wo,
            float* col) {
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        float* dst = col + ((static_cast<std::size_t>(c) * k + ki) * k + kj) *
                               (static_cast<std::size_t>(Ho) * Wo);
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride - pad + ki;
          if (iy < 0 || iy >= H) {
            std::fill_n(dst + static_cast<std::size_t>(oy) * Wo, Wo, 0.0f);
            continue;
          }
          const float* src = x + (static_cast<std::size_t>(c) * H + iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride - pad + kj;
            dst[static_cast<std::size_t>(oy) * Wo + ox] =
                (ix >= 0 && ix < W) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const float* col, int C, int H, int W, int k, int stride, int pad, int Ho, int Wo,
            float* x) {
  std::fill_n(x, static_cast<std::size_t>(C) * H * W, 0.0f);
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const float* src = col + ((static_cast<std::size_t>(c) * k + ki) * k + kj) *
                                     (static_cast<std::size_t>(Ho) * Wo);
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride - pad + ki;
          if (iy < 0 || iy >= H) continue;
          float* dst = x + (static_cast<std::size_t>(c) * H + iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride - pad + kj;
            if (ix >= 0 && ix < W) dst[ix] += src[static_cast<std::size_t>(oy) * Wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor Conv2d::forward(const Tensor& x) {
  if (x.dim() != 4 || x.size(1) != in_ch_)
    throw ModelError(weight.name + ": expected [N," + std::to_string(in_ch_) + ",H,W] input");
  const int N = x.size(0), H = x.size(2), W = x.size(3);
  const int Ho = out_size(H), Wo = out_size(W);
  if (Ho < 1 || Wo < 1) throw ModelError(weight.name + ": input too small");
  Tensor y({N, out_ch_, Ho, Wo});

  const int kk = in_ch_ * kernel_ * kernel_;
  const std::size_t cols = static_cast<std::size_t>(Ho) * Wo;
  const std::size_t x_stride = static_cast<std::size_t>(in_ch_) * H * W;
  const std::size_t y_stride = static_cast<std::size_t>(out_ch_) * cols;

#pragma omp parallel
  {
    std::vector<float> col(static_cast<std::size_t>(kk) * cols);
#pragma omp for schedule(static)
    for (int n = 0; n < N; ++n) {
      im2col(x.data() + n * x_stride, in_ch_, H, W, kernel_, stride_, pad_, Ho, Wo, col.data());
      ConstMapMat wm(weight.value.data(), out_ch_, kk);
      ConstMapMat cm(col.data(), kk, static_cast<Eigen::Index>(cols));
      MapMat ym(y.data() + n * y_stride, out_ch_, static_cast<Eigen::Index>(cols));
      ym.noalias() = wm * cm;
      if (has_bias_) ym.colwise() += Eigen::Map<const Eigen::VectorXf>(bias.value.data(), out_ch_);
    }
  }
  // the cached input is only needed for the weight gradient
  if (weight.trainable) cached_x_ = x;
  in_shape_ = x.shape();
  return y;
}

Tensor Conv2d::backward(const Tensor& dy, bool need_dx) {
  const int N = in_shape_[0], H = in_shape_[2], W = in_shape_[3];
  const int Ho = dy.size(2), Wo = dy.size(3);
  const int kk = in_ch_ * kernel_ * kernel_;
  const std::size_t cols = static_cast<std::size_t>(Ho) * Wo;
  const std::size_t x_stride = static_cast<std::size_t>(in_ch_) * H * W;
  const std::size_t y_stride = static_cast<std::size_t>(out_ch_) * cols;

  Tensor dx;
  if (need_dx) dx = Tensor(in_shape_);

  const bool want_dw = weight.trainable && cached_x_.numel() > 0;
  if (want_dw) {
    weight.ensure_grad();
    if (has_bias_) bias.ensure_grad();
  }

  int threads = 1;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  // per-thread weight-gradient accumulators, reduced in fixed order
  std::vector<std::vector<float>> dw_parts, db_parts;
  if (want_dw) {
    dw_parts.assign(static_cast<std::size_t>(threads),
                    std::vector<float>(static_cast<std::size_t>(out_ch_) * kk, 0.0f));
    if (has_bias_)
      db_parts.assign(static_cast<std::size_t>(threads),
                      std::vector<float>(static_cast<std::size_t>(out_ch_), 0.0f));
  }

#pragma omp parallel num_threads(threads)
  {
    int tid = 0;
#ifdef _OPENMP
    tid = omp_get_thread_num();
#endif
    std::vector<float> col;
    std::vector<float> dcol(need_dx ? static_cast<std::size_t>(kk) * cols : 0);
    if (want_dw) col.resize(static_cast<std::size_t>(kk) * cols);
#pragma omp for schedule(static)
    for (int n = 0; n < N; ++n) {
      ConstMapMat dym(dy.data() + n * y_stride, out_ch_, static_cast<Eigen::Index>(cols));
      if (want_dw) {
        im2col(cached_x_.data() + n * x_stride, in_ch_, H, W, kernel_, stride_, pad_, Ho, Wo,
               col.data());
        ConstMapMat cm(col.data(), kk, static_cast<Eigen::Index>(cols));
        MapMat dwm(dw_parts[static_cast<std::size_t>(tid)].data(), out_ch_, kk);
        dwm.noalias() += dym * cm.transpose();
        if (has_bias_) {
          Eigen::Map<Eigen::VectorXf> dbm(db_parts[static_cast<std::size_t>(tid)].data(),
                                          out_ch_);
          dbm.noalias() += dym.rowwise().sum();
        }
      }
      if (need_dx) {
        ConstMapMat wm(weight.value.data(), out_ch_, kk);
        MapMat dcm(dcol.data(), kk, static_cast<Eigen::Index>(cols));
        dcm.noalias() = wm.transpose() * dym;
        col2im(dcol.data(), in_ch_, H, W, kernel_, stride_, pad_, Ho, Wo,
               dx.data() + n * x_stride);
      }
    }
  }
  if (want_dw) {
    MapMat dwm(weight.grad.data(), out_ch_, kk);
    for (const auto& part : dw_parts)
      dwm += ConstMapMat(part.data(), out_ch_, kk);
    if (has_bias_) {
      Eigen::Map<Eigen::VectorXf> dbm(bias.grad.data(), out_ch_);
      for (const auto& part : db_parts)
        dbm += Eigen::Map<const Eigen::VectorXf>(part.data(), out_ch_);
    }
  }
  cached_x_ = Tensor();
  return dx;
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(std::string name, int in_features, int out_features)
    : in_(in_features), out_(out_features) {
  weight.name = name + ".weight";
  weight.value = Tensor({out_features, in_features});
  bias.name = name + ".bias";
  bias.value = Tensor({out_features});
}

void Linear::init(Rng& rng) {
  kaiming_normal(weight.value, in_, rng);
  bias.value.fill(0.0f);
}

Tensor Linear::forward(const Tensor& x) {
  if (x.dim() != 2 || x.size(1) != in_)
    throw ModelError(weight.name + ": expected [N," + std::to_string(in_) + "] input, got [" +
                     std::to_string(x.size(0)) + "," + std::to_string(x.dim() == 2 ? x.size(1) : -1) + "]");
  const int N = x.size(0);
  Tensor y({N, out_});
  ConstMapMat xm(x.data(), N, in_);
  ConstMapMat wm(weight.value.data(), out_, in_);
  MapMat ym(y.data(), N, out_);
  ym.noalias() = xm * wm.transpose();
  ym.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bias.value.data(), out_);
  cached_x_ = x;
  return y;
}

Tensor Linear::backward(const Tensor& dy, bool need_dx) {
  const int N = dy.size(0);
  ConstMapMat dym(dy.data(), N, out_);
  ConstMapMat xm(cached_x_.data(), N, in_);
  if (weight.trainable) {
    weight.ensure_grad();
    bias.ensure_grad();
    MapMat dwm(weight.grad.data(), out_, in_);
    dwm.noalias() += dym.transpose() * xm;
    Eigen::Map<Eigen::VectorXf> dbm(bias.grad.data(), out_);
    dbm.noalias() += dym.colwise().sum().transpose();
  }
  Tensor dx;
  if (need_dx) {
    dx = Tensor({N, in_});
    ConstMapMat wm(weight.value.data(), out_, in_);
    MapMat dxm(dx.data(), N, in_);
    dxm.noalias() = dym * wm;
  }
  cached_x_ = Tensor();
  return dx;
}

// ---------------------------------------------------------------------------
// ReLU

Tensor ReLU::forward(Tensor x) {
  const std::int64_t n = x.numel();
  mask_.assign(static_cast<std::size_t>(n), 0);
  float* v = x.data();
  std::uint8_t* m = mask_.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    if (v[i] > 0.0f) {
      m[i] = 1;
    } else {
      v[i] = 0.0f;
    }
  }
  return x;
}

Tensor ReLU::backward(const Tensor& dy) const {
  Tensor dx(dy.shape());
  const std::uint8_t* m = mask_.data();
  const float* g = dy.data();
  float* out = dx.data();
  for (std::int64_t i = 0; i < dy.numel(); ++i) out[i] = m[i] ? g[i] : 0.0f;
  return dx;
}

// ---------------------------------------------------------------------------
// MaxPool2d

Tensor MaxPool2d::forward(const Tensor& x) {
  const int N = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
  const int Ho = out_size(H), Wo = out_size(W);
  Tensor y({N, C, Ho, Wo});
  in_shape_ = x.shape();
  argmax_.assign(y.numel(), 0);

  const float* in = x.data();
  float* out = y.data();
  const std::int64_t planes = static_cast<std::int64_t>(N) * C;
#pragma omp parallel for schedule(static)
  for (std::int64_t pc = 0; pc < planes; ++pc) {
    const std::int64_t base = pc * H * W;
    std::int64_t oi = pc * Ho * Wo;
    for (int oy = 0; oy < Ho; ++oy) {
      for (int ox = 0; ox < Wo; ++ox, ++oi) {
        float best = -std::numeric_limits<float>::infinity();
        std::int64_t best_idx = -1;
        for (int ki = 0; ki < kernel_; ++ki) {
          const int iy = oy * stride_ - pad_ + ki;
          if (iy < 0 || iy >= H) continue;
          for (int kj = 0; kj < kernel_; ++kj) {
            const int ix = ox * stride_ - pad_ + kj;
            if (ix < 0 || ix >= W) continue;
            const float v = in[base + static_cast<std::int64_t>(iy) * W + ix];
            if (v > best) {
              best = v;
              best_idx = base + static_cast<std::int64_t>(iy) * W + ix;
            }
          }
        }
        out[oi] = best;
        argmax_[static_cast<std::size_t>(oi)] = best_idx;
      }
    }
  }
  return y;
}

Tensor MaxPool2d::backward(const Tensor& dy) const {
  Tensor dx(in_shape_);
  float* out = dx.data();
  const float* g = dy.data();
  for (std::int64_t i = 0; i < dy.numel(); ++i) out[argmax_[static_cast<std::size_t>(i)]] += g[i];
  return dx;
}

// ---------------------------------------------------------------------------
// AdaptiveAvgPool2d

Tensor AdaptiveAvgPool2d::forward(const Tensor& x) {
  const int N = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
  Tensor y({N, C, out_h_, out_w_});
  in_shape_ = x.shape();
  const float* in = x.data();
  float* out = y.data();
  std::int64_t oi = 0;
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const std::int64_t base = (static_cast<std::int64_t>(n) * C + c) * H * W;
      for (int oy = 0; oy < out_h_; ++oy) {
        const int y0 = oy * H / out_h_;
        const int y1 = ((oy + 1) * H + out_h_ - 1) / out_h_;
        for (int ox = 0; ox < out_w_; ++ox, ++oi) {
          const int x0 = ox * W / out_w_;
          const int x1 = ((ox + 1) * W + out_w_ - 1) / out_w_;
          double acc = 0.0;
          for (int iy = y0; iy < y1; ++iy)
            for (int ix = x0; ix < x1; ++ix)
              acc += in[base + static_cast<std::int64_t>(iy) * W + ix];
          out[oi] = static_cast<float>(acc / ((y1 - y0) * (x1 - x0)));
        }
      }
    }
  }
  return y;
}

Tensor AdaptiveAvgPool2d::backward(const Tensor& dy) const {
  Tensor dx(in_shape_);
  const int H = in_shape_[2], W = in_shape_[3];
  const int N = in_shape_[0], C = in_shape_[1];
  const float* g = dy.data();
  float* out = dx.data();
  std::int64_t oi = 0;
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const std::int64_t base = (static_cast<std::int64_t>(n) * C + c) * H * W;
      for (int oy = 0; oy < out_h_; ++oy) {
        const int y0 = oy * H / out_h_;
        const int y1 = ((oy + 1) * H + out_h_ - 1) / out_h_;
        for (int ox = 0; ox < out_w_; ++ox, ++oi) {
          const int x0 = ox * W / out_w_;
          const int x1 = ((ox + 1) * W + out_w_ - 1) / out_w_;
          const float share = g[oi] / static_cast<float>((y1 - y0) * (x1 - x0));
          for (int iy = y0; iy < y1; ++iy)
            for (int ix = x0; ix < x1; ++ix)
              out[base + static_cast<std::int64_t>(iy) * W + ix] += share;
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm2d

BatchNorm2d::BatchNorm2d(std::string name, int channels)
    : name_(std::move(name)), channels_(channels) {
  gamma.name = name_ + ".weight";
  gamma.value = Tensor({channels});
  beta.name = name_ + ".bias";
  beta.value = Tensor({channels});
  running_mean = Tensor({channels});
  running_var = Tensor({channels});
  init();
}

void BatchNorm2d::init() {
  gamma.value.fill(1.0f);
  beta.value.fill(0.0f);
  running_mean.fill(0.0f);
  running_var.fill(1.0f);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool training) {
  const int N = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
  if (C != channels_) throw ModelError(name_ + ": channel mismatch");
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  const std::int64_t per_channel = static_cast<std::int64_t>(N) * plane;

  used_batch_stats_ = training && !frozen_stats;
  // xhat is only consumed by backward; frozen groups never run one
  const bool keep_xhat = used_batch_stats_ || gamma.trainable;
  Tensor y(x.shape());
  cached_xhat_ = keep_xhat ? Tensor(x.shape()) : Tensor();
  cached_invstd_.assign(static_cast<std::size_t>(C), 0.0f);
  cached_mean_.assign(static_cast<std::size_t>(C), 0.0f);

#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    double mean, var;
    if (used_batch_stats_) {
      double sum = 0.0, sq = 0.0;
      for (int n = 0; n < N; ++n) {
        const float* p = x.data() + (static_cast<std::int64_t>(n) * C + c) * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
          sum += p[i];
          sq += static_cast<double>(p[i]) * p[i];
        }
      }
      mean = sum / static_cast<double>(per_channel);
      var = std::max(0.0, sq / static_cast<double>(per_channel) - mean * mean);
      const double unbiased =
          per_channel > 1 ? var * static_cast<double>(per_channel) / (per_channel - 1) : var;
      running_mean[c] = static_cast<float>((1.0 - momentum) * running_mean[c] + momentum * mean);
      running_var[c] = static_cast<float>((1.0 - momentum) * running_var[c] + momentum * unbiased);
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    const float invstd = static_cast<float>(1.0 / std::sqrt(var + eps));
    cached_invstd_[static_cast<std::size_t>(c)] = invstd;
    cached_mean_[static_cast<std::size_t>(c)] = static_cast<float>(mean);
    const float g = gamma.value[c], b = beta.value[c], mu = static_cast<float>(mean);
    const float scale = g * invstd;
    const float shift = b - scale * mu;
    for (int n = 0; n < N; ++n) {
      const std::int64_t off = (static_cast<std::int64_t>(n) * C + c) * plane;
      const float* px = x.data() + off;
      float* py = y.data() + off;
      if (keep_xhat) {
        float* ph = cached_xhat_.data() + off;
        for (std::int64_t i = 0; i < plane; ++i) {
          const float xhat = (px[i] - mu) * invstd;
          ph[i] = xhat;
          py[i] = g * xhat + b;
        }
      } else {
        for (std::int64_t i = 0; i < plane; ++i) py[i] = scale * px[i] + shift;
      }
    }
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy, bool need_dx) {
  const int N = dy.size(0), C = dy.size(1), H = dy.size(2), W = dy.size(3);
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  const std::int64_t per_channel = static_cast<std::int64_t>(N) * plane;

  const bool want_dparam = gamma.trainable;
  if (want_dparam) {
    gamma.ensure_grad();
    beta.ensure_grad();
  }
  Tensor dx;
  if (need_dx) dx = Tensor(dy.shape());
  const bool need_sums = want_dparam || used_batch_stats_;
  if (need_sums && cached_xhat_.numel() == 0)
    throw ModelError(name_ + ": backward without cached forward");

#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    if (need_sums) {
      for (int n = 0; n < N; ++n) {
        const std::int64_t off = (static_cast<std::int64_t>(n) * C + c) * plane;
        const float* pg = dy.data() + off;
        const float* ph = cached_xhat_.data() + off;
        for (std::int64_t i = 0; i < plane; ++i) {
          sum_dy += pg[i];
          sum_dy_xhat += static_cast<double>(pg[i]) * ph[i];
        }
      }
    }
    if (want_dparam) {
      gamma.grad[c] += static_cast<float>(sum_dy_xhat);
      beta.grad[c] += static_cast<float>(sum_dy);
    }
    if (!need_dx) continue;
    const float g = gamma.value[c];
    const float invstd = cached_invstd_[static_cast<std::size_t>(c)];
    if (used_batch_stats_) {
      const float m = static_cast<float>(per_channel);
      const float k1 = g * invstd / m;
      const float mean_dy = static_cast<float>(sum_dy);
      const float mean_dy_xhat = static_cast<float>(sum_dy_xhat);
      for (int n = 0; n < N; ++n) {
        const std::int64_t off = (static_cast<std::int64_t>(n) * C + c) * plane;
        const float* pg = dy.data() + off;
        const float* ph = cached_xhat_.data() + off;
        float* pd = dx.data() + off;
        for (std::int64_t i = 0; i < plane; ++i)
          pd[i] = k1 * (m * pg[i] - mean_dy - ph[i] * mean_dy_xhat);
      }
    } else {
      const float k = g * invstd;
      for (int n = 0; n < N; ++n) {
        const std::int64_t off = (static_cast<std::int64_t>(n) * C + c) * plane;
        const float* pg = dy.data() + off;
        float* pd = dx.data() + off;
        for (std::int64_t i = 0; i < plane; ++i) pd[i] = k * pg[i];
      }
    }
  }
  cached_xhat_ = Tensor();
  return dx;
}

// ---------------------------------------------------------------------------
// Softmax / cross-entropy

Tensor softmax_rows(const Tensor& logits) {
  if (logits.dim() != 2) throw ModelError("softmax expects a 2-D tensor");
  const int N = logits.size(0), K = logits.size(1);
  Tensor probs({N, K});
  for (int n = 0; n < N; ++n) {
    const float* in = logits.data() + static_cast<std::int64_t>(n) * K;
    float* out = probs.data() + static_cast<std::int64_t>(n) * K;
    float mx = in[0];
    for (int k = 1; k < K; ++k) mx = std::max(mx, in[k]);
    double denom = 0.0;
    for (int k = 0; k < K; ++k) {
      out[k] = std::exp(in[k] - mx);
      denom += out[k];
    }
    const float inv = static_cast<float>(1.0 / denom);
    for (int k = 0; k < K; ++k) out[k] *= inv;
  }
  return probs;
}

float cross_entropy(const Tensor& logits, const std::vector<int>& labels, Tensor* dlogits) {
  const int N = logits.size(0), K = logits.size(1);
  if (static_cast<int>(labels.size()) != N)
    throw ModelError("cross_entropy: labels/logits size mismatch");
  Tensor probs = softmax_rows(logits);
  double loss = 0.0;
  for (int n = 0; n < N; ++n) {
    const float p = std::max(probs.at(n, labels[static_cast<std::size_t>(n)]), 1e-12f);
    loss -= std::log(p);
  }
  loss /= N;
  if (!std::isfinite(loss)) throw ModelError("non-finite training loss");
  if (dlogits) {
    *dlogits = probs;
    const float inv = 1.0f / static_cast<float>(N);
    for (int n = 0; n < N; ++n) {
      float* row = dlogits->data() + static_cast<std::int64_t>(n) * K;
      row[labels[static_cast<std::size_t>(n)]] -= 1.0f;
      for (int k = 0; k < K; ++k) row[k] *= inv;
    }
  }
  return static_cast<float>(loss);
}

}  // namespace elastofuse::nn
