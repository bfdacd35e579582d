#pragma once

#include <memory>
#include <string>
#include <vector>

#include "elastofuse/backbones.hpp"
#include "elastofuse/nn/layers.hpp"

namespace elastofuse::models {

/// Trainable 2-class image classifier: the surface the training loop,
/// checkpointing, and evaluation work against.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual nn::Tensor forward_logits(const nn::Tensor& batch, bool training) = 0;
  virtual void backward(const nn::Tensor& dlogits) = 0;

  /// Softmax probabilities in evaluation mode, [N, 2].
  nn::Tensor forward_probs(const nn::Tensor& batch) {
    return nn::softmax_rows(forward_logits(batch, false));
  }

  virtual std::vector<nn::Parameter*> parameters() = 0;
  std::vector<nn::Parameter*> trainable_parameters() {
    std::vector<nn::Parameter*> out;
    for (nn::Parameter* p : parameters())
      if (p->trainable) out.push_back(p);
    return out;
  }
  virtual nn::StateMap state() = 0;
  virtual int input_channels() const = 0;
  virtual std::string describe() const = 0;
};

/// A single backbone with its classification head.
class SingleBackboneModel final : public Classifier {
 public:
  explicit SingleBackboneModel(std::unique_ptr<backbones::Backbone> backbone);

  nn::Tensor forward_logits(const nn::Tensor& batch, bool training) override;
  void backward(const nn::Tensor& dlogits) override;
  std::vector<nn::Parameter*> parameters() override { return backbone_->parameters(); }
  nn::StateMap state() override { return backbone_->state(); }
  int input_channels() const override { return backbone_->input_channels(); }
  std::string describe() const override { return backbone_->arch(); }

  backbones::Backbone& backbone() { return *backbone_; }
  std::unique_ptr<backbones::Backbone> release_backbone() { return std::move(backbone_); }

 private:
  std::unique_ptr<backbones::Backbone> backbone_;
};

/// Serializes a model (single or ensemble) with enough metadata to rebuild
/// it; loading restores evaluation outputs exactly.
void save_model(Classifier& model, const std::string& path);
std::unique_ptr<Classifier> load_model(const std::string& path);

}  // namespace elastofuse::models
