#include "elastofuse/samples.hpp"

#include <algorithm>
#include <cmath>

#include "elastofuse/errors.hpp"

namespace elastofuse::dataio {

const char* modality_code(Modality m) {
  switch (m) {
    case Modality::B: return "b";
    case Modality::SE: return "se";
    case Modality::BSE: return "bse";
  }
  return "?";
}

Modality modality_from_code(const std::string& code) {
  if (code == "b" || code == "B") return Modality::B;
  if (code == "se" || code == "SE") return Modality::SE;
  if (code == "bse" || code == "BSE") return Modality::BSE;
  throw ConfigError("unknown modality: " + code);
}

int modality_channels(Modality m) { return m == Modality::BSE ? 4 : 3; }

ImagePair load_pair(const ImageRecord& record, Label label) {
  ImagePair pair;
  Image bmode = load_image(record.bmode_path);
  pair.gray = bmode.channels == 1 ? std::move(bmode) : to_luminance(bmode);
  pair.color = load_image(record.elasto_path);
  if (pair.color.channels != 3)
    throw DataError("elastography image must have 3 channels: " + record.elasto_path);
  pair.label = label;
  pair.patient_id = record.patient_id;
  pair.image_id = record.image_id;
  return pair;
}

ImagePair crop_lesion(const ImagePair& pair, const Rect& roi) {
  if (roi.x + roi.w > pair.gray.width || roi.y + roi.h > pair.gray.height ||
      roi.x + roi.w > pair.color.width || roi.y + roi.h > pair.color.height)
    throw DataError("roi out of bounds for image " + pair.image_id);
  ImagePair out = pair;
  out.gray = crop(pair.gray, roi);
  out.color = crop(pair.color, roi);
  return out;
}

ImagePair resize_pair(const ImagePair& pair, int side) {
  ImagePair out = pair;
  out.gray = resize_bilinear(pair.gray, side, side);
  out.color = resize_bilinear(pair.color, side, side);
  return out;
}

StackedSample stack_modalities(const ImagePair& pair, Modality modality) {
  if (pair.gray.height != pair.color.height || pair.gray.width != pair.color.width)
    throw DataError("modality size mismatch for image " + pair.image_id);
  const int side = pair.gray.height;
  if (pair.gray.width != side) throw DataError("stack expects square images");

  const int channels = modality_channels(modality);
  StackedSample s;
  s.tensor = nn::Tensor({channels, side, side});
  s.label = pair.label;
  s.patient_id = pair.patient_id;
  s.image_id = pair.image_id;
  s.modality = modality;

  const std::size_t plane = static_cast<std::size_t>(side) * side;
  float* dst = s.tensor.data();
  switch (modality) {
    case Modality::B:
      for (int c = 0; c < 3; ++c)
        std::copy_n(pair.gray.plane(0), plane, dst + c * plane);
      break;
    case Modality::SE:
      for (int c = 0; c < 3; ++c)
        std::copy_n(pair.color.plane(c), plane, dst + c * plane);
      break;
    case Modality::BSE:
      std::copy_n(pair.gray.plane(0), plane, dst + 0 * plane);
      for (int c = 0; c < 3; ++c)
        std::copy_n(pair.color.plane(c), plane, dst + (c + 1) * plane);
      break;
  }
  return s;
}

namespace {

Image sample_to_image(const StackedSample& s) {
  const int c = s.tensor.size(0), h = s.tensor.size(1), w = s.tensor.size(2);
  Image img(c, h, w);
  std::copy_n(s.tensor.data(), s.tensor.numel(), img.data.data());
  return img;
}

}  // namespace

StackedSample augment(const StackedSample& sample, Rng& rng) {
  Image img = sample_to_image(sample);
  img = resize_bilinear(img, kAugmentSide, kAugmentSide);
  const int span = kAugmentSide - kInputSide;
  const int ox = static_cast<int>(rng.uniform_int(span + 1));
  const int oy = static_cast<int>(rng.uniform_int(span + 1));
  img = crop(img, Rect{ox, oy, kInputSide, kInputSide});
  if (rng.bernoulli(0.5)) img = hflip(img);

  StackedSample out = sample;
  out.tensor = nn::Tensor({img.channels, img.height, img.width});
  std::copy_n(img.data.data(), out.tensor.numel(), out.tensor.data());
  return out;
}

namespace {
// ImageNet channel statistics; the gray plane of a BSE stack reuses their mean.
constexpr float kRgbMean[3] = {0.485f, 0.456f, 0.406f};
constexpr float kRgbStd[3] = {0.229f, 0.224f, 0.225f};
constexpr float kGrayMean = (0.485f + 0.456f + 0.406f) / 3.0f;
constexpr float kGrayStd = (0.229f + 0.224f + 0.225f) / 3.0f;
}  // namespace

std::vector<float> channel_means(Modality m) {
  if (m == Modality::BSE) return {kGrayMean, kRgbMean[0], kRgbMean[1], kRgbMean[2]};
  return {kRgbMean[0], kRgbMean[1], kRgbMean[2]};
}

std::vector<float> channel_stds(Modality m) {
  if (m == Modality::BSE) return {kGrayStd, kRgbStd[0], kRgbStd[1], kRgbStd[2]};
  return {kRgbStd[0], kRgbStd[1], kRgbStd[2]};
}

nn::Tensor make_batch(const std::vector<const StackedSample*>& samples, bool do_augment,
                      Rng* rng) {
  if (samples.empty()) throw DataError("empty batch");
  const Modality modality = samples.front()->modality;
  const int channels = modality_channels(modality);
  const int side = samples.front()->tensor.size(1);
  nn::Tensor batch({static_cast<int>(samples.size()), channels, side, side});

  const auto means = channel_means(modality);
  const auto stds = channel_stds(modality);
  const std::size_t plane = static_cast<std::size_t>(side) * side;

  for (std::size_t i = 0; i < samples.size(); ++i) {
    const StackedSample* s = samples[i];
    if (s->modality != modality) throw DataError("mixed modalities in one batch");
    StackedSample tmp;
    if (do_augment) {
      tmp = augment(*s, *rng);
      s = &tmp;
    }
    float* dst = batch.data() + i * channels * plane;
    const float* src = s->tensor.data();
    for (int c = 0; c < channels; ++c) {
      const float mu = means[c], inv = 1.0f / stds[c];
      for (std::size_t p = 0; p < plane; ++p)
        dst[c * plane + p] = (src[c * plane + p] - mu) * inv;
    }
  }
  return batch;
}

std::vector<StackedSample> build_samples(const DatasetManifest& manifest, Modality modality,
                                         bool use_crop, int side) {
  std::vector<StackedSample> out;
  out.reserve(manifest.image_count());
  for (const auto& rec : manifest.images()) {
    ImagePair pair = load_pair(rec, manifest.patient(rec.patient_id).label);
    if (use_crop && rec.roi) pair = crop_lesion(pair, *rec.roi);
    pair = resize_pair(pair, side);
    out.push_back(stack_modalities(pair, modality));
  }
  return out;
}

}  // namespace elastofuse::dataio
