#include "elastofuse/ensemble.hpp"

#include <cmath>
#include <cstring>

#include "elastofuse/errors.hpp"

namespace elastofuse::models {

SingleBackboneModel::SingleBackboneModel(std::unique_ptr<backbones::Backbone> backbone)
    : backbone_(std::move(backbone)) {}

nn::Tensor SingleBackboneModel::forward_logits(const nn::Tensor& batch, bool training) {
  return backbone_->forward_logits(batch, training);
}

void SingleBackboneModel::backward(const nn::Tensor& dlogits) {
  backbone_->backward_logits(dlogits);
}

EnsembleModel::EnsembleModel(std::unique_ptr<backbones::Backbone> a,
                             std::unique_ptr<backbones::Backbone> b, Rng& head_rng)
    : a_(std::move(a)), b_(std::move(b)),
      head_("ensemble_head", a_->feature_dim() + b_->feature_dim(), backbones::kNumClasses) {
  nn::normal_init(head_.weight.value, 0.01f, head_rng);
  head_.bias.value.fill(0.0f);
}

nn::Tensor EnsembleModel::forward_logits(const nn::Tensor& batch, bool training) {
  nn::Tensor fa = a_->extract_features(batch, training);
  nn::Tensor fb = b_->extract_features(batch, training);
  const int n = fa.size(0);
  const int wa = fa.size(1), wb = fb.size(1);
  if (wa != a_->feature_dim() || wb != b_->feature_dim())
    throw ModelError("extractor feature width does not match its declared dimension");
  nn::Tensor concat({n, wa + wb});
  for (int i = 0; i < n; ++i) {
    std::memcpy(concat.data() + static_cast<std::int64_t>(i) * (wa + wb),
                fa.data() + static_cast<std::int64_t>(i) * wa, sizeof(float) * wa);
    std::memcpy(concat.data() + static_cast<std::int64_t>(i) * (wa + wb) + wa,
                fb.data() + static_cast<std::int64_t>(i) * wb, sizeof(float) * wb);
  }
  last_concat_width_ = wa + wb;
  return head_.forward(concat);
}

void EnsembleModel::backward(const nn::Tensor& dlogits) {
  // extractors are frozen by construction; only the head learns
  head_.backward(dlogits, false);
}

std::vector<nn::Parameter*> EnsembleModel::parameters() {
  std::vector<nn::Parameter*> out = a_->parameters();
  for (nn::Parameter* p : b_->parameters()) out.push_back(p);
  out.push_back(&head_.weight);
  out.push_back(&head_.bias);
  return out;
}

nn::StateMap EnsembleModel::state() {
  nn::StateMap out;
  for (auto& [name, t] : a_->state()) out.emplace_back("a." + name, t);
  for (auto& [name, t] : b_->state()) out.emplace_back("b." + name, t);
  out.emplace_back(head_.weight.name, &head_.weight.value);
  out.emplace_back(head_.bias.name, &head_.bias.value);
  return out;
}

std::pair<nn::Tensor, nn::Tensor> EnsembleModel::gradcam_hook_grads(const nn::Tensor& dlogits) {
  nn::Tensor dconcat = head_.backward(dlogits, true);
  const int n = dconcat.size(0);
  const int wa = a_->feature_dim(), wb = b_->feature_dim();
  nn::Tensor dfa({n, wa}), dfb({n, wb});
  for (int i = 0; i < n; ++i) {
    std::memcpy(dfa.data() + static_cast<std::int64_t>(i) * wa,
                dconcat.data() + static_cast<std::int64_t>(i) * (wa + wb), sizeof(float) * wa);
    std::memcpy(dfb.data() + static_cast<std::int64_t>(i) * wb,
                dconcat.data() + static_cast<std::int64_t>(i) * (wa + wb) + wa,
                sizeof(float) * wb);
  }
  return {a_->gradcam_from_features(dfa), b_->gradcam_from_features(dfb)};
}

void strip_classifier(backbones::Backbone& model) { model.strip_head(); }

std::unique_ptr<EnsembleModel> build_ensemble(std::unique_ptr<backbones::Backbone> a,
                                              std::unique_ptr<backbones::Backbone> b,
                                              Rng& head_rng) {
  if (a->has_head() || b->has_head())
    throw ModelError("build_ensemble expects stripped extractors");
  if (a->input_channels() != b->input_channels())
    throw ModelError("extractors disagree on input channels");
  a->apply_freeze(backbones::FreezePolicy::all_frozen());
  b->apply_freeze(backbones::FreezePolicy::all_frozen());
  return std::make_unique<EnsembleModel>(std::move(a), std::move(b), head_rng);
}

std::pair<nn::Tensor, std::vector<int>> soft_vote(const nn::Tensor& probs_a,
                                                  const nn::Tensor& probs_b) {
  if (!probs_a.same_shape(probs_b) || probs_a.dim() != 2 || probs_a.size(1) != 2)
    throw DataError("soft_vote expects two equally sized [N,2] probability matrices");
  const int n = probs_a.size(0);
  auto check_rows = [](const nn::Tensor& p) {
    for (int i = 0; i < p.size(0); ++i) {
      const float s = p.at(i, 0) + p.at(i, 1);
      if (std::fabs(s - 1.0f) > 1e-4f)
        throw DataError("probability row does not sum to 1");
    }
  };
  check_rows(probs_a);
  check_rows(probs_b);
  nn::Tensor mean({n, 2});
  std::vector<int> pred(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    mean.at(i, 0) = 0.5f * (probs_a.at(i, 0) + probs_b.at(i, 0));
    mean.at(i, 1) = 0.5f * (probs_a.at(i, 1) + probs_b.at(i, 1));
    // benign only on strict majority of probability mass
    pred[static_cast<std::size_t>(i)] = mean.at(i, 0) > mean.at(i, 1) ? 0 : 1;
  }
  return {mean, pred};
}

}  // namespace elastofuse::models
