#include "elastofuse/gradcam.hpp"

#include <algorithm>
#include <cmath>

#include "elastofuse/errors.hpp"

namespace elastofuse::gradcam {

nn::Tensor weighted_cam(const nn::Tensor& activations, const nn::Tensor& grads) {
  if (activations.dim() != 4 || !activations.same_shape(grads))
    throw ModelError("weighted_cam expects matching [1,K,h,w] tensors");
  const int K = activations.size(1), h = activations.size(2), w = activations.size(3);
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  nn::Tensor map({h, w});
  for (int k = 0; k < K; ++k) {
    const float* g = grads.data() + static_cast<std::int64_t>(k) * plane;
    double weight = 0.0;
    for (std::int64_t i = 0; i < plane; ++i) weight += g[i];
    weight /= static_cast<double>(plane);
    const float* a = activations.data() + static_cast<std::int64_t>(k) * plane;
    float* m = map.data();
    const float wk = static_cast<float>(weight);
    for (std::int64_t i = 0; i < plane; ++i) m[i] += wk * a[i];
  }
  return map;
}

namespace {

dataio::Image grid_to_image(const nn::Tensor& grid) {
  dataio::Image img(1, grid.size(0), grid.size(1));
  std::copy_n(grid.data(), grid.numel(), img.data.data());
  return img;
}

nn::Tensor image_to_grid(const dataio::Image& img) {
  nn::Tensor grid({img.height, img.width});
  std::copy_n(img.data.data(), grid.numel(), grid.data());
  return grid;
}

nn::Tensor one_hot_direction(int target_class) {
  if (target_class < 0 || target_class >= backbones::kNumClasses)
    throw ModelError("target class out of range");
  nn::Tensor d({1, backbones::kNumClasses});
  d.at(0, target_class) = 1.0f;
  return d;
}

void check_hook(const nn::Tensor& hook) {
  if (hook.dim() != 4 || hook.size(0) != 1)
    throw ModelError("model exposes no convolutional activations");
}

}  // namespace

Heatmap finish_heatmap(const nn::Tensor& combined, int target_class, int side) {
  nn::Tensor relu(combined.shape());
  for (std::int64_t i = 0; i < combined.numel(); ++i)
    relu[i] = combined[i] > 0.0f ? combined[i] : 0.0f;

  Heatmap hm;
  hm.source_h = combined.size(0);
  hm.source_w = combined.size(1);
  hm.target_class = target_class;
  hm.grid = image_to_grid(dataio::resize_bilinear(grid_to_image(relu), side, side));

  float mx = 0.0f;
  for (std::int64_t i = 0; i < hm.grid.numel(); ++i) mx = std::max(mx, hm.grid[i]);
  if (mx > 0.0f) {
    const float inv = 1.0f / mx;
    for (std::int64_t i = 0; i < hm.grid.numel(); ++i) hm.grid[i] *= inv;
  }
  hm.normalized = true;
  return hm;
}

Heatmap gradcam_single(backbones::Backbone& model, const dataio::StackedSample& sample,
                       int target_class) {
  nn::Tensor dlogits = one_hot_direction(target_class);
  nn::Tensor x = dataio::make_batch({&sample}, false, nullptr);
  model.forward_logits(x, false);
  nn::Tensor activations = model.hook_activations();
  check_hook(activations);
  nn::Tensor grads = model.gradcam_from_logits(dlogits);
  return finish_heatmap(weighted_cam(activations, grads), target_class);
}

Heatmap gradcam_ensemble(models::EnsembleModel& model, const dataio::StackedSample& sample,
                         int target_class) {
  nn::Tensor dlogits = one_hot_direction(target_class);
  nn::Tensor x = dataio::make_batch({&sample}, false, nullptr);
  model.forward_logits(x, false);
  nn::Tensor act_a = model.extractor_a().hook_activations();
  nn::Tensor act_b = model.extractor_b().hook_activations();
  check_hook(act_a);
  check_hook(act_b);
  auto [grad_a, grad_b] = model.gradcam_hook_grads(dlogits);

  nn::Tensor map_a = weighted_cam(act_a, grad_a);
  nn::Tensor map_b = weighted_cam(act_b, grad_b);
  if (map_a.shape() != map_b.shape())
    map_a = image_to_grid(
        dataio::resize_bilinear(grid_to_image(map_a), map_b.size(0), map_b.size(1)));
  for (std::int64_t i = 0; i < map_b.numel(); ++i) map_b[i] += map_a[i];
  return finish_heatmap(map_b, target_class);
}

namespace {

void jet(float h, float rgb[3]) {
  rgb[0] = std::clamp(1.5f - std::fabs(4.0f * h - 3.0f), 0.0f, 1.0f);
  rgb[1] = std::clamp(1.5f - std::fabs(4.0f * h - 2.0f), 0.0f, 1.0f);
  rgb[2] = std::clamp(1.5f - std::fabs(4.0f * h - 1.0f), 0.0f, 1.0f);
}

void hot(float h, float rgb[3]) {
  rgb[0] = std::clamp(3.0f * h, 0.0f, 1.0f);
  rgb[1] = std::clamp(3.0f * h - 1.0f, 0.0f, 1.0f);
  rgb[2] = std::clamp(3.0f * h - 2.0f, 0.0f, 1.0f);
}

}  // namespace

void overlay(const Heatmap& heatmap, const dataio::Image& source, const std::string& colormap,
             const std::string& out_path, double blend) {
  if (!heatmap.normalized) throw ModelError("overlay expects a normalized heatmap");
  void (*cmap)(float, float[3]) = nullptr;
  if (colormap == "jet") cmap = jet;
  else if (colormap == "hot") cmap = hot;
  else throw ConfigError("unknown colormap: " + colormap);

  const int side = heatmap.grid.size(0);
  dataio::Image img = source;
  if (img.height != side || img.width != side)
    img = dataio::resize_bilinear(img, side, side);
  if (img.channels == 1) {
    dataio::Image rgb(3, side, side);
    for (int c = 0; c < 3; ++c)
      std::copy_n(img.plane(0), static_cast<std::size_t>(side) * side, rgb.plane(c));
    img = std::move(rgb);
  }

  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const float h = heatmap.grid.at(y, x);
      float rgb[3];
      cmap(h, rgb);
      const float alpha = static_cast<float>(blend) * h;
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = (1.0f - alpha) * img.at(c, y, x) + alpha * rgb[c];
    }
  }
  dataio::save_png(out_path, img);
}

}  // namespace elastofuse::gradcam
