#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "elastofuse/backbones.hpp"
#include "elastofuse/classifier.hpp"
#include "elastofuse/image.hpp"
#include "elastofuse/samples.hpp"

namespace testsupport {

/// Scratch directory wiped on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    namespace fs = std::filesystem;
    path_ = (fs::temp_directory_path() / ("elastofuse_" + tag + "_" +
                                          std::to_string(::getpid())))
                .string();
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

/// Straight half-pixel-center bilinear resampling in double precision; the
/// independent reference the production resampler is checked against.
inline std::vector<double> reference_bilinear(const std::vector<double>& src, int h, int w,
                                              int oh, int ow) {
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  const double sy = static_cast<double>(h) / oh;
  const double sx = static_cast<double>(w) / ow;
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double fy = (y + 0.5) * sy - 0.5;
      double fx = (x + 0.5) * sx - 0.5;
      fy = std::min(std::max(fy, 0.0), static_cast<double>(h - 1));
      fx = std::min(std::max(fx, 0.0), static_cast<double>(w - 1));
      const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
      const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
      const double wy = fy - y0, wx = fx - x0;
      out[static_cast<std::size_t>(y) * ow + x] =
          src[static_cast<std::size_t>(y0) * w + x0] * (1 - wy) * (1 - wx) +
          src[static_cast<std::size_t>(y0) * w + x1] * (1 - wy) * wx +
          src[static_cast<std::size_t>(y1) * w + x0] * wy * (1 - wx) +
          src[static_cast<std::size_t>(y1) * w + x1] * wy * wx;
    }
  }
  return out;
}

/// Minimal convolutional backbone for Grad-CAM and fusion mechanics: one
/// 3x3 convolution (stride 1, pad 1), ReLU hook, global average pooling to
/// `channels` features, 2-way head. Works at any input size.
class MiniConvBackbone final : public elastofuse::backbones::Backbone {
 public:
  MiniConvBackbone(const std::string& id, int in_channels, int channels,
                   std::uint64_t seed)
      : id_(id),
        channels_(channels),
        conv_(id + ".conv", in_channels, channels, 3, 1, 1, true),
        pool_(1, 1),
        fc_(id + ".fc", channels, 2) {
    elastofuse::Rng rng(seed);
    conv_.init(rng);
    elastofuse::nn::normal_init(fc_.weight.value, 0.1f, rng);
    fc_.bias.value.fill(0.0f);
  }

  const std::string& arch() const override { return id_; }
  int feature_dim() const override { return channels_; }
  int input_channels() const override { return conv_.in_channels(); }

  elastofuse::nn::Tensor extract_features(const elastofuse::nn::Tensor& x, bool) override {
    elastofuse::nn::Tensor a = relu_.forward(conv_.forward(x));
    hook_ = a;
    a = pool_.forward(a);
    elastofuse::nn::Tensor f = a.reshaped({a.size(0), channels_});
    features_ = f;
    return f;
  }

  elastofuse::nn::Tensor gradcam_from_features(
      const elastofuse::nn::Tensor& dfeatures) override {
    return backward_features(dfeatures, true);
  }

  std::vector<elastofuse::backbones::ParamGroup> groups() override {
    std::vector<elastofuse::backbones::ParamGroup> gs;
    gs.push_back({"conv", {&conv_.weight, &conv_.bias}, conv_.weight.trainable});
    if (has_head_) gs.push_back({"fc", {&fc_.weight, &fc_.bias}, fc_.weight.trainable});
    return gs;
  }

  elastofuse::nn::StateMap state() override {
    elastofuse::nn::StateMap s;
    for (auto& g : groups())
      for (auto* p : g.params) s.emplace_back(p->name, &p->value);
    return s;
  }

  void inflate_input(int, elastofuse::backbones::InflatePolicy) override {}

  elastofuse::nn::Conv2d& conv() { return conv_; }
  elastofuse::nn::Linear& fc() { return fc_; }

 protected:
  elastofuse::nn::Tensor backward_features(const elastofuse::nn::Tensor& dfeatures,
                                           bool stop_at_hook) override {
    elastofuse::nn::Tensor d = dfeatures.reshaped({dfeatures.size(0), channels_, 1, 1});
    d = pool_.backward(d);
    if (stop_at_hook) return d;
    d = relu_.backward(d);
    conv_.backward(d, false);
    return {};
  }

  elastofuse::nn::Linear& head() override { return fc_; }

  std::vector<std::string> resolve_policy(
      const elastofuse::backbones::FreezePolicy& policy) const override {
    using Kind = elastofuse::backbones::FreezePolicy::Kind;
    if (policy.kind == Kind::AllFrozen) return {};
    if (policy.kind == Kind::Custom) return policy.custom_trainable;
    return {"conv", "fc"};
  }

  void set_group_trainable(const std::string& group, bool trainable) override {
    if (group == "conv") {
      conv_.weight.trainable = trainable;
      conv_.bias.trainable = trainable;
    } else if (group == "fc") {
      fc_.weight.trainable = trainable;
      fc_.bias.trainable = trainable;
    }
  }

 private:
  std::string id_;
  int channels_;
  elastofuse::nn::Conv2d conv_;
  elastofuse::nn::ReLU relu_;
  elastofuse::nn::AdaptiveAvgPool2d pool_;
  elastofuse::nn::Linear fc_;
};

inline elastofuse::dataio::StackedSample make_sample(int channels, int side, float value,
                                                     const std::string& id = "img0",
                                                     const std::string& patient = "p0") {
  elastofuse::dataio::StackedSample s;
  s.tensor = elastofuse::nn::Tensor({channels, side, side});
  s.tensor.fill(value);
  s.image_id = id;
  s.patient_id = patient;
  s.label = elastofuse::dataio::Label::Benign;
  s.modality = channels == 4 ? elastofuse::dataio::Modality::BSE
                             : elastofuse::dataio::Modality::SE;
  return s;
}

}  // namespace testsupport
