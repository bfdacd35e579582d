#pragma once

#include <memory>
#include <string>
#include <vector>

#include "elastofuse/nn/layers.hpp"
#include "elastofuse/rng.hpp"
#include "elastofuse/tensor.hpp"

namespace elastofuse::backbones {

constexpr int kNumClasses = 2;  // 0 = benign, 1 = malignant, fixed everywhere

enum class InflatePolicy { ZeroInit, MeanInit };

InflatePolicy inflate_policy_from_string(const std::string& s);
const char* inflate_policy_name(InflatePolicy p);

/// Which parameter groups stay trainable during fine-tuning.
struct FreezePolicy {
  enum class Kind { AlexNetLast3, ResNetFreezeFirst4, AllFrozen, Custom };
  Kind kind = Kind::AllFrozen;
  std::vector<std::string> custom_trainable;

  static FreezePolicy alexnet_last3() { return {Kind::AlexNetLast3, {}}; }
  static FreezePolicy resnet_freeze_first4() { return {Kind::ResNetFreezeFirst4, {}}; }
  static FreezePolicy all_frozen() { return {Kind::AllFrozen, {}}; }
  static FreezePolicy custom(std::vector<std::string> trainable_groups) {
    return {Kind::Custom, std::move(trainable_groups)};
  }
  std::string to_string() const;
  static FreezePolicy parse(const std::string& s);
};

struct ParamGroup {
  std::string name;
  std::vector<nn::Parameter*> params;
  bool trainable = true;
};

/// A pretrained convolutional classifier with named parameter groups, an
/// optional 2-class head, a penultimate-feature surface, and a cached
/// last-conv activation hook for Grad-CAM.
class Backbone {
 public:
  virtual ~Backbone() = default;

  virtual const std::string& arch() const = 0;
  virtual int feature_dim() const = 0;
  virtual int input_channels() const = 0;

  /// Penultimate-layer activations, [N, feature_dim]. Also caches the
  /// last-conv activations for Grad-CAM.
  virtual nn::Tensor extract_features(const nn::Tensor& x, bool training) = 0;

  /// Head logits, [N, 2]. Throws ModelError when the head was stripped.
  nn::Tensor forward_logits(const nn::Tensor& x, bool training);

  /// Softmax class probabilities, [N, 2].
  nn::Tensor forward_classify(const nn::Tensor& x);

  /// Training backward from d(loss)/d(logits); gradients accumulate on
  /// trainable parameters only and propagation stops below the deepest
  /// trainable group.
  void backward_logits(const nn::Tensor& dlogits);

  /// Grad-CAM backward: gradient of the given logit direction at the cached
  /// last-conv activations. No propagation below the hook.
  nn::Tensor gradcam_from_logits(const nn::Tensor& dlogits);

  /// Same, entering from the penultimate-feature gradient (ensemble path).
  virtual nn::Tensor gradcam_from_features(const nn::Tensor& dfeatures) = 0;

  /// Last-conv activations cached by the most recent forward, [N, K, h, w].
  const nn::Tensor& hook_activations() const { return hook_; }

  bool has_head() const { return has_head_; }
  /// Removes the classification layer. Throws ModelError if already stripped.
  void strip_head();
  /// Re-draws the head from the given stream (normal, stddev 0.01).
  void reinit_head(Rng& rng);

  virtual std::vector<ParamGroup> groups() = 0;
  virtual nn::StateMap state() = 0;
  std::vector<nn::Parameter*> parameters();
  std::vector<nn::Parameter*> trainable_parameters();

  void apply_freeze(const FreezePolicy& policy);
  const FreezePolicy& freeze_policy() const { return policy_; }

  /// Widens the first convolution to n input channels; new slices are
  /// prepended at channel 0. n == current channel count is a no-op.
  virtual void inflate_input(int n, InflatePolicy policy) = 0;

 protected:
  /// Backward through feature layers given d(features); when stop_at_hook the
  /// walk ends at the last-conv activation and its gradient is returned.
  virtual nn::Tensor backward_features(const nn::Tensor& dfeatures, bool stop_at_hook) = 0;
  virtual nn::Linear& head() = 0;
  virtual std::vector<std::string> resolve_policy(const FreezePolicy& policy) const = 0;
  virtual void set_group_trainable(const std::string& group, bool trainable) = 0;

  nn::Tensor hook_;
  nn::Tensor features_;  // cached penultimate output of the last forward
  bool has_head_ = true;
  FreezePolicy policy_ = FreezePolicy::all_frozen();
};

/// Architecture ids registered out of the box: "alexnet", "resnet18".
/// The registry is the extension point for further architectures.
bool architecture_known(const std::string& arch);
std::vector<std::string> registered_architectures();

/// Constructs a backbone with freshly initialized (deterministic, per-arch
/// seeded) weights. Throws ModelError for unknown architectures.
std::unique_ptr<Backbone> make_backbone(const std::string& arch);

/// Pretrained weight source: a cache directory of weight archives. The
/// ELASTOFUSE_WEIGHTS_DIR environment variable overrides the default.
struct WeightSource {
  std::string cache_dir;
  static WeightSource default_cache();
};

/// Loads a backbone with pretrained weights from the cache, bootstrapping a
/// deterministic archive when none exists yet. Verifies the archive checksum
/// and architecture metadata.
std::unique_ptr<Backbone> load_backbone(const std::string& arch, const WeightSource& source);

/// Default fine-tuning policy for a registered architecture.
FreezePolicy default_policy(const std::string& arch);

}  // namespace elastofuse::backbones
