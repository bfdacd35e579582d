#include <algorithm>
#include <memory>

#include "elastofuse/backbones.hpp"
#include "elastofuse/errors.hpp"
#include "elastofuse/nn/layers.hpp"

namespace elastofuse::backbones {

namespace {

constexpr int kAlexFeatureDim = 4096;

nn::Tensor inflated_first_kernel(const nn::Tensor& w, int new_in, InflatePolicy policy) {
  const int out_ch = w.shape()[0], in_ch = w.shape()[1], k = w.shape()[2];
  const int extra = new_in - in_ch;
  nn::Tensor nw({out_ch, new_in, k, k});
  for (int o = 0; o < out_ch; ++o) {
    for (int c = 0; c < new_in; ++c) {
      for (int i = 0; i < k; ++i) {
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
      }
    }
  }
  return nw;
}

}  // namespace

namespace detail {

/// Five convolutional layers with overlapping max pooling after the first,
/// second, and fifth, adaptive average pooling to a 6x6 grid, then three
/// fully connected layers. The penultimate width is 4096; the Grad-CAM hook
/// sits on the fifth convolution's activation.
class AlexNet final : public Backbone {
 public:
  AlexNet()
      : conv1_("conv1", 3, 64, 11, 4, 2, true),
        conv2_("conv2", 64, 192, 5, 1, 2, true),
        conv3_("conv3", 192, 384, 3, 1, 1, true),
        conv4_("conv4", 384, 256, 3, 1, 1, true),
        conv5_("conv5", 256, 256, 3, 1, 1, true),
        pool1_(3, 2),
        pool2_(3, 2),
        pool3_(3, 2),
        avgpool_(6, 6),
        fc1_("fc1", 256 * 6 * 6, kAlexFeatureDim),
        fc2_("fc2", kAlexFeatureDim, kAlexFeatureDim),
        fc3_("fc3", kAlexFeatureDim, kNumClasses) {
    auto seed_init = [&](auto& layer, const std::string& name) {
      Rng rng = named_rng(0x9d2c5680u, "alexnet." + name);
      layer.init(rng);
    };
    seed_init(conv1_, "conv1");
    seed_init(conv2_, "conv2");
    seed_init(conv3_, "conv3");
    seed_init(conv4_, "conv4");
    seed_init(conv5_, "conv5");
    seed_init(fc1_, "fc1");
    seed_init(fc2_, "fc2");
    Rng head_rng = named_rng(0x9d2c5680u, "alexnet.fc3");
    nn::normal_init(fc3_.weight.value, 0.01f, head_rng);
    fc3_.bias.value.fill(0.0f);
  }

  const std::string& arch() const override {
    static const std::string id = "alexnet";
    return id;
  }
  int feature_dim() const override { return kAlexFeatureDim; }
  int input_channels() const override { return conv1_.in_channels(); }

  nn::Tensor extract_features(const nn::Tensor& x, bool) override {
    if (x.dim() != 4 || x.size(1) != input_channels())
      throw ModelError("alexnet: input must be [N," + std::to_string(input_channels()) +
                       ",224,224]");
    nn::Tensor a = relu1_.forward(conv1_.forward(x));
    a = pool1_.forward(a);
    a = relu2_.forward(conv2_.forward(a));
    a = pool2_.forward(a);
    a = relu3_.forward(conv3_.forward(a));
    a = relu4_.forward(conv4_.forward(a));
    a = relu5_.forward(conv5_.forward(a));
    hook_ = a;
    a = pool3_.forward(a);
    a = avgpool_.forward(a);
    const int n = a.size(0);
    nn::Tensor flat = a.reshaped({n, 256 * 6 * 6});
    nn::Tensor f = relu_f1_.forward(fc1_.forward(flat));
    f = relu_f2_.forward(fc2_.forward(f));
    features_ = f;
    return f;
  }

  nn::Tensor gradcam_from_features(const nn::Tensor& dfeatures) override {
    return backward_features(dfeatures, true);
  }

  std::vector<ParamGroup> groups() override {
    std::vector<ParamGroup> gs;
    auto conv_group = [](const std::string& name, nn::Conv2d& c) {
      return ParamGroup{name, {&c.weight, &c.bias}, c.weight.trainable};
    };
    auto fc_group = [](const std::string& name, nn::Linear& l) {
      return ParamGroup{name, {&l.weight, &l.bias}, l.weight.trainable};
    };
    gs.push_back(conv_group("conv1", conv1_));
    gs.push_back(conv_group("conv2", conv2_));
    gs.push_back(conv_group("conv3", conv3_));
    gs.push_back(conv_group("conv4", conv4_));
    gs.push_back(conv_group("conv5", conv5_));
    gs.push_back(fc_group("fc1", fc1_));
    gs.push_back(fc_group("fc2", fc2_));
    if (has_head_) gs.push_back(fc_group("fc3", fc3_));
    return gs;
  }

  nn::StateMap state() override {
    nn::StateMap s;
    for (auto& g : groups())
      for (nn::Parameter* p : g.params) s.emplace_back(p->name, &p->value);
    return s;
  }

  void inflate_input(int n, InflatePolicy policy) override {
    if (n < 3) throw ModelError("input channels must be >= 3");
    if (n == conv1_.in_channels()) return;
    if (n < conv1_.in_channels())
      throw ModelError("cannot shrink input channels");
    conv1_.set_input_channels(n, inflated_first_kernel(conv1_.weight.value, n, policy));
  }

 protected:
  nn::Tensor backward_features(const nn::Tensor& dfeatures, bool stop_at_hook) override {
    const bool conv_any = conv1_.weight.trainable || conv2_.weight.trainable ||
                          conv3_.weight.trainable || conv4_.weight.trainable ||
                          conv5_.weight.trainable;
    const bool past_fc2 = fc1_.weight.trainable || conv_any || stop_at_hook;
    nn::Tensor d = relu_f2_.backward(dfeatures);
    d = fc2_.backward(d, past_fc2);
    if (!past_fc2) return {};
    const bool past_fc1 = conv_any || stop_at_hook;
    d = relu_f1_.backward(d);
    d = fc1_.backward(d, past_fc1);
    if (!past_fc1) return {};
    d = d.reshaped({d.size(0), 256, 6, 6});
    d = avgpool_.backward(d);
    d = pool3_.backward(d);
    if (stop_at_hook) return d;

    auto below = [&](int idx) {
      switch (idx) {
        case 5: return conv1_.weight.trainable || conv2_.weight.trainable ||
                       conv3_.weight.trainable || conv4_.weight.trainable;
        case 4: return conv1_.weight.trainable || conv2_.weight.trainable ||
                       conv3_.weight.trainable;
        case 3: return conv1_.weight.trainable || conv2_.weight.trainable;
        case 2: return conv1_.weight.trainable;
        default: return false;
      }
    };
    d = relu5_.backward(d);
    d = conv5_.backward(d, below(5));
    if (!below(5)) return {};
    d = relu4_.backward(d);
    d = conv4_.backward(d, below(4));
    if (!below(4)) return {};
    d = relu3_.backward(d);
    d = conv3_.backward(d, below(3));
    if (!below(3)) return {};
    d = pool2_.backward(d);
    d = relu2_.backward(d);
    d = conv2_.backward(d, below(2));
    if (!below(2)) return {};
    d = pool1_.backward(d);
    d = relu1_.backward(d);
    conv1_.backward(d, false);
    return {};
  }

  nn::Linear& head() override { return fc3_; }

  std::vector<std::string> resolve_policy(const FreezePolicy& policy) const override {
    switch (policy.kind) {
      case FreezePolicy::Kind::AlexNetLast3:
        return {"fc1", "fc2", "fc3"};
      case FreezePolicy::Kind::AllFrozen:
        return {};
      case FreezePolicy::Kind::Custom: {
        static const std::vector<std::string> known = {"conv1", "conv2", "conv3", "conv4",
                                                       "conv5", "fc1",   "fc2",   "fc3"};
        for (const auto& g : policy.custom_trainable)
          if (std::find(known.begin(), known.end(), g) == known.end())
            throw ModelError("freeze policy names unknown alexnet group: " + g);
        return policy.custom_trainable;
      }
      case FreezePolicy::Kind::ResNetFreezeFirst4:
        throw ModelError("resnet_freeze_first4 does not apply to alexnet");
    }
    return {};
  }

  void set_group_trainable(const std::string& group, bool trainable) override {
    auto set_conv = [&](nn::Conv2d& c) {
      c.weight.trainable = trainable;
      c.bias.trainable = trainable;
    };
    auto set_fc = [&](nn::Linear& l) {
      l.weight.trainable = trainable;
      l.bias.trainable = trainable;
    };
    if (group == "conv1") set_conv(conv1_);
    else if (group == "conv2") set_conv(conv2_);
    else if (group == "conv3") set_conv(conv3_);
    else if (group == "conv4") set_conv(conv4_);
    else if (group == "conv5") set_conv(conv5_);
    else if (group == "fc1") set_fc(fc1_);
    else if (group == "fc2") set_fc(fc2_);
    else if (group == "fc3") set_fc(fc3_);
  }

 private:
  nn::Conv2d conv1_, conv2_, conv3_, conv4_, conv5_;
  nn::MaxPool2d pool1_, pool2_, pool3_;
  nn::AdaptiveAvgPool2d avgpool_;
  nn::Linear fc1_, fc2_, fc3_;
  nn::ReLU relu1_, relu2_, relu3_, relu4_, relu5_, relu_f1_, relu_f2_;
};

std::unique_ptr<Backbone> make_alexnet() { return std::make_unique<AlexNet>(); }

}  // namespace detail
}  // namespace elastofuse::backbones
