#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "elastofuse/classifier.hpp"
#include "elastofuse/rng.hpp"

namespace elastofuse::models {

/// Two frozen feature extractors fused by a fresh linear + softmax head over
/// their concatenated penultimate features. Concatenation order is fixed
/// [a, b]; for the standard AlexNet/ResNet-18 pair the head input width is
/// 4096 + 512 = 4608.
class EnsembleModel final : public Classifier {
 public:
  EnsembleModel(std::unique_ptr<backbones::Backbone> a,
                std::unique_ptr<backbones::Backbone> b, Rng& head_rng);

  nn::Tensor forward_logits(const nn::Tensor& batch, bool training) override;
  void backward(const nn::Tensor& dlogits) override;
  std::vector<nn::Parameter*> parameters() override;
  nn::StateMap state() override;
  int input_channels() const override { return a_->input_channels(); }
  std::string describe() const override { return "ensemble"; }

  backbones::Backbone& extractor_a() { return *a_; }
  backbones::Backbone& extractor_b() { return *b_; }
  nn::Linear& head() { return head_; }
  int concat_width() const { return a_->feature_dim() + b_->feature_dim(); }

  /// Width of the concatenated feature row produced by the last forward.
  int last_concat_width() const { return last_concat_width_; }

  /// Grad-CAM entry: gradients of the given logit direction at both
  /// extractors' last-conv activations. Requires a preceding forward.
  std::pair<nn::Tensor, nn::Tensor> gradcam_hook_grads(const nn::Tensor& dlogits);

 private:
  std::unique_ptr<backbones::Backbone> a_;
  std::unique_ptr<backbones::Backbone> b_;
  nn::Linear head_;
  int last_concat_width_ = 0;
};

/// Step two of the fusion recipe: strips the head so the penultimate features
/// become the output surface. Throws ModelError when already stripped.
void strip_classifier(backbones::Backbone& model);

/// Builds the fused model from two stripped extractors. The head is
/// initialized from the given stream; both extractors are frozen. Throws
/// ModelError when extractors disagree on input channels or still carry
/// heads.
std::unique_ptr<EnsembleModel> build_ensemble(std::unique_ptr<backbones::Backbone> a,
                                              std::unique_ptr<backbones::Backbone> b,
                                              Rng& head_rng);

/// Mean of two probability matrices plus per-row argmax; exact ties resolve
/// to malignant. Throws DataError when shapes differ or a row is not a
/// distribution (sum off by more than 1e-4).
std::pair<nn::Tensor, std::vector<int>> soft_vote(const nn::Tensor& probs_a,
                                                  const nn::Tensor& probs_b);

}  // namespace elastofuse::models
