#pragma once

#include <string>

#include "elastofuse/backbones.hpp"
#include "elastofuse/ensemble.hpp"
#include "elastofuse/image.hpp"
#include "elastofuse/samples.hpp"
#include "elastofuse/tensor.hpp"

namespace elastofuse::gradcam {

struct Heatmap {
  nn::Tensor grid;  // [H, W], nonnegative; max 1 after normalization unless all zero
  bool normalized = false;
  int source_h = 0;  // combined-map grid before upsampling
  int source_w = 0;
  int target_class = 0;
};

/// Gradient-weighted combination of activation maps: per-channel weight is
/// the spatial mean of the gradient, output is the weighted sum over
/// channels (no ReLU yet). activations/grads: [1, K, h, w].
nn::Tensor weighted_cam(const nn::Tensor& activations, const nn::Tensor& grads);

/// ReLU, bilinear upsample to side x side, then max-normalization (skipped
/// for an identically zero map).
Heatmap finish_heatmap(const nn::Tensor& combined, int target_class, int side = 224);

/// Grad-CAM for a single backbone: weights from the target-class score
/// gradient at the last convolution, ReLU of the weighted sum, upsampled to
/// the input size and normalized.
Heatmap gradcam_single(backbones::Backbone& model, const dataio::StackedSample& sample,
                       int target_class);

/// Ensemble Grad-CAM: per-extractor weighted maps from the fused head's
/// target-class gradient; the a-side map is bilinearly resized to the b-side
/// grid before the maps are combined, then ReLU/upsample/normalize.
Heatmap gradcam_ensemble(models::EnsembleModel& model, const dataio::StackedSample& sample,
                         int target_class);

/// Alpha-blends a colormapped heatmap over the source image and writes a
/// PNG. Per-pixel alpha is blend * heat so a zero map reproduces the source.
/// Colormaps: "jet", "hot".
void overlay(const Heatmap& heatmap, const dataio::Image& source, const std::string& colormap,
             const std::string& out_path, double blend = 0.4);

}  // namespace elastofuse::gradcam
