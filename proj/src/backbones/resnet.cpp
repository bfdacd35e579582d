#include <algorithm>
#include <memory>
#include <optional>
#include <vector>

#include "elastofuse/backbones.hpp"
#include "elastofuse/errors.hpp"
#include "elastofuse/nn/layers.hpp"

namespace elastofuse::backbones {
namespace detail {

namespace {

constexpr int kResFeatureDim = 512;

void add_into(nn::Tensor& dst, const nn::Tensor& src) {
  float* d = dst.data();
  const float* s = src.data();
  for (std::int64_t i = 0; i < dst.numel(); ++i) d[i] += s[i];
}

/// 3x3-3x3 residual block; the first convolution may stride and a 1x1
/// projection matches channels on the skip path.
struct BasicBlock {
  nn::Conv2d conv1, conv2;
  nn::BatchNorm2d bn1, bn2;
  nn::ReLU relu1, relu2;
  std::optional<nn::Conv2d> down_conv;
  std::optional<nn::BatchNorm2d> down_bn;

  BasicBlock(const std::string& name, int in_ch, int out_ch, int stride)
      : conv1(name + ".conv1", in_ch, out_ch, 3, stride, 1, false),
        conv2(name + ".conv2", out_ch, out_ch, 3, 1, 1, false),
        bn1(name + ".bn1", out_ch),
        bn2(name + ".bn2", out_ch) {
    if (stride != 1 || in_ch != out_ch) {
      down_conv.emplace(name + ".downsample.conv", in_ch, out_ch, 1, stride, 0, false);
      down_bn.emplace(name + ".downsample.bn", out_ch);
    }
  }

  void init(Rng& rng) {
    conv1.init(rng);
    conv2.init(rng);
    bn1.init();
    bn2.init();
    if (down_conv) {
      down_conv->init(rng);
      down_bn->init();
    }
  }

  nn::Tensor forward(const nn::Tensor& x, bool training) {
    nn::Tensor main = bn1.forward(conv1.forward(x), training);
    main = relu1.forward(main);
    main = bn2.forward(conv2.forward(main), training);
    if (down_conv) {
      nn::Tensor skip = down_bn->forward(down_conv->forward(x), training);
      add_into(main, skip);
    } else {
      add_into(main, x);
    }
    return relu2.forward(main);
  }

  bool trainable() const { return conv1.weight.trainable; }

  nn::Tensor backward(const nn::Tensor& dy, bool need_dx) {
    nn::Tensor d = relu2.backward(dy);
    nn::Tensor dx_main;
    const bool inner = trainable() || need_dx;
    if (inner) {
      nn::Tensor t = bn2.backward(d, true);
      t = conv2.backward(t, true);
      t = relu1.backward(t);
      t = bn1.backward(t, true);
      dx_main = conv1.backward(t, need_dx);
    }
    if (!need_dx) {
      if (down_conv && trainable()) {
        nn::Tensor t = down_bn->backward(d, true);
        down_conv->backward(t, false);
      }
      return {};
    }
    nn::Tensor dx;
    if (down_conv) {
      nn::Tensor t = down_bn->backward(d, true);
      dx = down_conv->backward(t, true);
    } else {
      dx = d;
    }
    add_into(dx, dx_main);
    return dx;
  }

  void collect_params(std::vector<nn::Parameter*>& out) {
    out.push_back(&conv1.weight);
    out.push_back(&bn1.gamma);
    out.push_back(&bn1.beta);
    out.push_back(&conv2.weight);
    out.push_back(&bn2.gamma);
    out.push_back(&bn2.beta);
    if (down_conv) {
      out.push_back(&down_conv->weight);
      out.push_back(&down_bn->gamma);
      out.push_back(&down_bn->beta);
    }
  }

  void collect_state(nn::StateMap& out) {
    std::vector<nn::Parameter*> params;
    collect_params(params);
    for (nn::Parameter* p : params) out.emplace_back(p->name, &p->value);
    out.emplace_back(bn1.name() + ".running_mean", &bn1.running_mean);
    out.emplace_back(bn1.name() + ".running_var", &bn1.running_var);
    out.emplace_back(bn2.name() + ".running_mean", &bn2.running_mean);
    out.emplace_back(bn2.name() + ".running_var", &bn2.running_var);
    if (down_bn) {
      out.emplace_back(down_bn->name() + ".running_mean", &down_bn->running_mean);
      out.emplace_back(down_bn->name() + ".running_var", &down_bn->running_var);
    }
  }

  void set_trainable(bool trainable) {
    std::vector<nn::Parameter*> params;
    collect_params(params);
    for (nn::Parameter* p : params) p->trainable = trainable;
    bn1.frozen_stats = !trainable;
    bn2.frozen_stats = !trainable;
    if (down_bn) down_bn->frozen_stats = !trainable;
  }
};

}  // namespace

/// Standard 18-layer residual network: 7x7 stem, four residual stages of two
/// blocks each, global average pooling, 2-way head. Penultimate width 512;
/// the Grad-CAM hook sits on the final stage's output.
class ResNet18 final : public Backbone {
 public:
  ResNet18()
      : stem_conv_("stem.conv1", 3, 64, 7, 2, 3, false),
        stem_bn_("stem.bn1", 64),
        stem_pool_(3, 2, 1),
        avgpool_(1, 1),
        fc_("fc", kResFeatureDim, kNumClasses) {
    const int widths[4] = {64, 128, 256, 512};
    int in_ch = 64;
    for (int s = 0; s < 4; ++s) {
      const std::string stage = "stage" + std::to_string(s + 1);
      const int stride = s == 0 ? 1 : 2;
      stages_[s].emplace_back(stage + ".0", in_ch, widths[s], stride);
      stages_[s].emplace_back(stage + ".1", widths[s], widths[s], 1);
      in_ch = widths[s];
    }
    Rng rng = named_rng(0x9d2c5680u, "resnet18.stem");
    stem_conv_.init(rng);
    stem_bn_.init();
    for (int s = 0; s < 4; ++s) {
      Rng srng = named_rng(0x9d2c5680u, "resnet18.stage", static_cast<std::uint64_t>(s));
      for (auto& b : stages_[s]) b.init(srng);
    }
    Rng head_rng = named_rng(0x9d2c5680u, "resnet18.fc");
    nn::normal_init(fc_.weight.value, 0.01f, head_rng);
    fc_.bias.value.fill(0.0f);
  }

  const std::string& arch() const override {
    static const std::string id = "resnet18";
    return id;
  }
  int feature_dim() const override { return kResFeatureDim; }
  int input_channels() const override { return stem_conv_.in_channels(); }

  nn::Tensor extract_features(const nn::Tensor& x, bool training) override {
    if (x.dim() != 4 || x.size(1) != input_channels())
      throw ModelError("resnet18: input must be [N," + std::to_string(input_channels()) +
                       ",224,224]");
    nn::Tensor a = stem_bn_.forward(stem_conv_.forward(x), training);
    a = stem_relu_.forward(a);
    a = stem_pool_.forward(a);
    for (int s = 0; s < 4; ++s)
      for (auto& b : stages_[s]) a = b.forward(a, training);
    hook_ = a;
    a = avgpool_.forward(a);
    nn::Tensor f = a.reshaped({a.size(0), kResFeatureDim});
    features_ = f;
    return f;
  }

  nn::Tensor gradcam_from_features(const nn::Tensor& dfeatures) override {
    return backward_features(dfeatures, true);
  }

  std::vector<ParamGroup> groups() override {
    std::vector<ParamGroup> gs;
    ParamGroup stem{"stem", {&stem_conv_.weight, &stem_bn_.gamma, &stem_bn_.beta},
                    stem_conv_.weight.trainable};
    gs.push_back(std::move(stem));
    for (int s = 0; s < 4; ++s) {
      ParamGroup g;
      g.name = "stage" + std::to_string(s + 1);
      for (auto& b : stages_[s]) b.collect_params(g.params);
      g.trainable = stages_[s][0].trainable();
      gs.push_back(std::move(g));
    }
    if (has_head_)
      gs.push_back(ParamGroup{"fc", {&fc_.weight, &fc_.bias}, fc_.weight.trainable});
    return gs;
  }

  nn::StateMap state() override {
    nn::StateMap s;
    s.emplace_back(stem_conv_.weight.name, &stem_conv_.weight.value);
    s.emplace_back(stem_bn_.gamma.name, &stem_bn_.gamma.value);
    s.emplace_back(stem_bn_.beta.name, &stem_bn_.beta.value);
    s.emplace_back(stem_bn_.name() + ".running_mean", &stem_bn_.running_mean);
    s.emplace_back(stem_bn_.name() + ".running_var", &stem_bn_.running_var);
    for (int st = 0; st < 4; ++st)
      for (auto& b : stages_[st]) b.collect_state(s);
    if (has_head_) {
      s.emplace_back(fc_.weight.name, &fc_.weight.value);
      s.emplace_back(fc_.bias.name, &fc_.bias.value);
    }
    return s;
  }

  void inflate_input(int n, InflatePolicy policy) override {
    if (n < 3) throw ModelError("input channels must be >= 3");
    if (n == stem_conv_.in_channels()) return;
    if (n < stem_conv_.in_channels()) throw ModelError("cannot shrink input channels");
    const nn::Tensor& w = stem_conv_.weight.value;
    const int out_ch = w.shape()[0], in_ch = w.shape()[1], k = w.shape()[2];
    const int extra = n - in_ch;
    nn::Tensor nw({out_ch, n, k, k});
    for (int o = 0; o < out_ch; ++o)
      for (int c = 0; c < n; ++c)
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j) {
            if (c < extra) {
              if (policy == InflatePolicy::ZeroInit) {
                nw.at(o, c, i, j) = 0.0f;
              } else {
                float acc = 0.0f;
                for (int s = 0; s < in_ch; ++s) acc += w.at(o, s, i, j);
                nw.at(o, c, i, j) = acc / static_cast<float>(in_ch);
              }
            } else {
              nw.at(o, c, i, j) = w.at(o, c - extra, i, j);
            }
          }
    stem_conv_.set_input_channels(n, nw);
  }

 protected:
  nn::Tensor backward_features(const nn::Tensor& dfeatures, bool stop_at_hook) override {
    nn::Tensor d = dfeatures.reshaped({dfeatures.size(0), kResFeatureDim, 1, 1});
    d = avgpool_.backward(d);
    if (stop_at_hook) return d;

    // earliest trainable feature group: 0 = stem, 1..4 = stages; 5 = none
    int earliest = 5;
    if (stem_conv_.weight.trainable) earliest = 0;
    for (int s = 3; s >= 0; --s)
      if (stages_[s][0].trainable()) earliest = std::min(earliest, s + 1);
    if (earliest == 5) return {};

    for (int s = 3; s >= 0; --s) {
      const int stage_no = s + 1;
      if (earliest > stage_no) break;
      const bool below = earliest < stage_no;
      for (int i = static_cast<int>(stages_[s].size()) - 1; i >= 0; --i) {
        const bool need_dx = below || i > 0;
        d = stages_[s][static_cast<std::size_t>(i)].backward(d, need_dx);
      }
      if (!below) return {};
    }
    d = stem_pool_.backward(d);
    d = stem_relu_.backward(d);
    d = stem_bn_.backward(d, true);
    stem_conv_.backward(d, false);
    return {};
  }

  nn::Linear& head() override { return fc_; }

  std::vector<std::string> resolve_policy(const FreezePolicy& policy) const override {
    switch (policy.kind) {
      case FreezePolicy::Kind::ResNetFreezeFirst4:
        return {"stage4", "fc"};
      case FreezePolicy::Kind::AllFrozen:
        return {};
      case FreezePolicy::Kind::Custom: {
        static const std::vector<std::string> known = {"stem", "stage1", "stage2",
                                                       "stage3", "stage4", "fc"};
        for (const auto& g : policy.custom_trainable)
          if (std::find(known.begin(), known.end(), g) == known.end())
            throw ModelError("freeze policy names unknown resnet18 group: " + g);
        return policy.custom_trainable;
      }
      case FreezePolicy::Kind::AlexNetLast3:
        throw ModelError("alexnet_last3 does not apply to resnet18");
    }
    return {};
  }

  void set_group_trainable(const std::string& group, bool trainable) override {
    if (group == "stem") {
      stem_conv_.weight.trainable = trainable;
      stem_bn_.gamma.trainable = trainable;
      stem_bn_.beta.trainable = trainable;
      stem_bn_.frozen_stats = !trainable;
      return;
    }
    if (group == "fc") {
      fc_.weight.trainable = trainable;
      fc_.bias.trainable = trainable;
      return;
    }
    for (int s = 0; s < 4; ++s)
      if (group == "stage" + std::to_string(s + 1))
        for (auto& b : stages_[s]) b.set_trainable(trainable);
  }

 private:
  nn::Conv2d stem_conv_;
  nn::BatchNorm2d stem_bn_;
  nn::ReLU stem_relu_;
  nn::MaxPool2d stem_pool_;
  std::vector<BasicBlock> stages_[4];
  nn::AdaptiveAvgPool2d avgpool_;
  nn::Linear fc_;
};

std::unique_ptr<Backbone> make_resnet18() { return std::make_unique<ResNet18>(); }

}  // namespace detail
}  // namespace elastofuse::backbones
