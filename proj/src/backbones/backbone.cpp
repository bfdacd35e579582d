#include "elastofuse/backbones.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>

#include "elastofuse/checkpoint.hpp"
#include "elastofuse/errors.hpp"

namespace fs = std::filesystem;

namespace elastofuse::backbones {

InflatePolicy inflate_policy_from_string(const std::string& s) {
  if (s == "zero") return InflatePolicy::ZeroInit;
  if (s == "mean") return InflatePolicy::MeanInit;
  throw ConfigError("unknown inflation policy: " + s + " (expected zero|mean)");
}

const char* inflate_policy_name(InflatePolicy p) {
  return p == InflatePolicy::ZeroInit ? "zero" : "mean";
}

std::string FreezePolicy::to_string() const {
  switch (kind) {
    case Kind::AlexNetLast3: return "alexnet_last3";
    case Kind::ResNetFreezeFirst4: return "resnet_freeze_first4";
    case Kind::AllFrozen: return "all_frozen";
    case Kind::Custom: {
      std::string s = "custom:";
      for (std::size_t i = 0; i < custom_trainable.size(); ++i) {
        if (i) s += ',';
        s += custom_trainable[i];
      }
      return s;
    }
  }
  return "all_frozen";
}

FreezePolicy FreezePolicy::parse(const std::string& s) {
  if (s == "alexnet_last3") return alexnet_last3();
  if (s == "resnet_freeze_first4") return resnet_freeze_first4();
  if (s == "all_frozen") return all_frozen();
  if (s.rfind("custom:", 0) == 0) {
    std::vector<std::string> groups;
    std::stringstream ss(s.substr(7));
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) groups.push_back(item);
    return custom(std::move(groups));
  }
  throw ConfigError("unknown freeze policy: " + s);
}

nn::Tensor Backbone::forward_logits(const nn::Tensor& x, bool training) {
  if (!has_head_) throw ModelError(arch() + ": classification head was stripped");
  nn::Tensor f = extract_features(x, training);
  return head().forward(f);
}

nn::Tensor Backbone::forward_classify(const nn::Tensor& x) {
  return nn::softmax_rows(forward_logits(x, false));
}

void Backbone::backward_logits(const nn::Tensor& dlogits) {
  if (!has_head_) throw ModelError(arch() + ": classification head was stripped");
  auto gs = groups();
  bool feature_trainable = false;
  for (std::size_t i = 0; i + 1 < gs.size(); ++i) feature_trainable |= gs[i].trainable;
  nn::Tensor dfeat = head().backward(dlogits, feature_trainable);
  if (feature_trainable) backward_features(dfeat, false);
}

nn::Tensor Backbone::gradcam_from_logits(const nn::Tensor& dlogits) {
  if (!has_head_) throw ModelError(arch() + ": classification head was stripped");
  nn::Tensor dfeat = head().backward(dlogits, true);
  return backward_features(dfeat, true);
}

void Backbone::strip_head() {
  if (!has_head_) throw ModelError(arch() + ": head already stripped");
  has_head_ = false;
}

void Backbone::reinit_head(Rng& rng) {
  if (!has_head_) throw ModelError(arch() + ": cannot reinitialize a stripped head");
  nn::normal_init(head().weight.value, 0.01f, rng);
  head().bias.value.fill(0.0f);
}

std::vector<nn::Parameter*> Backbone::parameters() {
  std::vector<nn::Parameter*> out;
  for (auto& g : groups())
    for (nn::Parameter* p : g.params) out.push_back(p);
  return out;
}

std::vector<nn::Parameter*> Backbone::trainable_parameters() {
  std::vector<nn::Parameter*> out;
  for (nn::Parameter* p : parameters())
    if (p->trainable) out.push_back(p);
  return out;
}

void Backbone::apply_freeze(const FreezePolicy& policy) {
  const std::vector<std::string> trainable = resolve_policy(policy);
  for (auto& g : groups()) {
    const bool on = std::find(trainable.begin(), trainable.end(), g.name) != trainable.end();
    set_group_trainable(g.name, on);
  }
  policy_ = policy;
}

// ---------------------------------------------------------------------------
// Registry and pretrained-weight cache

namespace detail {
std::unique_ptr<Backbone> make_alexnet();
std::unique_ptr<Backbone> make_resnet18();
}  // namespace detail

namespace {

using Factory = std::function<std::unique_ptr<Backbone>()>;

const std::map<std::string, Factory>& registry() {
  static const std::map<std::string, Factory> reg = {
      {"alexnet", detail::make_alexnet},
      {"resnet18", detail::make_resnet18},
  };
  return reg;
}

}  // namespace

bool architecture_known(const std::string& arch) { return registry().count(arch) > 0; }

std::vector<std::string> registered_architectures() {
  std::vector<std::string> out;
  for (const auto& [name, _] : registry()) out.push_back(name);
  return out;
}

std::unique_ptr<Backbone> make_backbone(const std::string& arch) {
  auto it = registry().find(arch);
  if (it == registry().end()) throw ModelError("unknown architecture: " + arch);
  return it->second();
}

WeightSource WeightSource::default_cache() {
  if (const char* env = std::getenv("ELASTOFUSE_WEIGHTS_DIR"); env && *env)
    return WeightSource{env};
  return WeightSource{"weights_cache"};
}

std::unique_ptr<Backbone> load_backbone(const std::string& arch, const WeightSource& source) {
  std::unique_ptr<Backbone> model = make_backbone(arch);
  fs::create_directories(source.cache_dir);
  const fs::path path = fs::path(source.cache_dir) / (arch + ".efc");
  if (fs::exists(path)) {
    nlohmann::json meta = load_checkpoint(path.string(), model->state());
    if (meta.value("architecture", "") != arch)
      throw CheckpointError("weight archive is for architecture '" +
                            meta.value("architecture", "?") + "', wanted '" + arch + "'");
    if (meta.value("input_channels", 3) != 3)
      throw CheckpointError("weight archive must carry 3-channel kernels");
  } else {
    nlohmann::json meta;
    meta["architecture"] = arch;
    meta["input_channels"] = 3;
    meta["feature_dim"] = model->feature_dim();
    meta["class_convention"] = "0=benign,1=malignant";
    save_checkpoint(path.string(), meta, model->state());
  }
  return model;
}

FreezePolicy default_policy(const std::string& arch) {
  if (arch == "alexnet") return FreezePolicy::alexnet_last3();
  if (arch == "resnet18") return FreezePolicy::resnet_freeze_first4();
  return FreezePolicy::all_frozen();
}

}  // namespace elastofuse::backbones
