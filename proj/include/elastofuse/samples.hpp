#pragma once

#include <string>
#include <vector>

#include "elastofuse/image.hpp"
#include "elastofuse/manifest.hpp"
#include "elastofuse/rng.hpp"
#include "elastofuse/tensor.hpp"

namespace elastofuse::dataio {

/// Which channels a sample carries.
///   B   — 3 channels, grayscale replicated
///   SE  — 3 channels, elastography RGB
///   BSE — 4 channels, [gray, R, G, B]
enum class Modality { B, SE, BSE };

const char* modality_code(Modality m);
Modality modality_from_code(const std::string& code);
int modality_channels(Modality m);

struct ImagePair {
  Image gray;   // 1 channel
  Image color;  // 3 channels
  Label label = Label::Benign;
  std::string patient_id;
  std::string image_id;
};

struct StackedSample {
  nn::Tensor tensor;  // [C, side, side], values in [0, 1]
  Label label = Label::Benign;
  std::string patient_id;
  std::string image_id;
  Modality modality = Modality::BSE;
};

constexpr int kInputSide = 224;
constexpr int kAugmentSide = 256;

/// Loads and scales both modalities of a record. The B-mode image must decode
/// to 1 channel (a color file is collapsed to luminance); the elastography
/// image must decode to 3 channels.
ImagePair load_pair(const ImageRecord& record, Label label);

/// Crops both modalities with the identical rectangle.
ImagePair crop_lesion(const ImagePair& pair, const Rect& roi);

/// Resizes both modalities to side x side with bilinear interpolation.
ImagePair resize_pair(const ImagePair& pair, int side = kInputSide);

/// Stacks a resized pair into a sample of the requested modality.
StackedSample stack_modalities(const ImagePair& pair, Modality modality);

/// Training-time transform: upscale to 256, random 224 crop, horizontal flip
/// with probability 0.5. All channels receive the identical geometry.
StackedSample augment(const StackedSample& sample, Rng& rng);

/// Per-channel standardization statistics carried over from pretraining.
/// Channel order matches the sample layout; the gray channel of a BSE sample
/// uses the mean of the three color-channel statistics.
std::vector<float> channel_means(Modality m);
std::vector<float> channel_stds(Modality m);

/// Builds an [N, C, side, side] network input from samples: optional
/// augmentation, then standardization.
nn::Tensor make_batch(const std::vector<const StackedSample*>& samples, bool do_augment,
                      Rng* rng);

/// Full manifest -> sample materialization used by training and evaluation.
/// use_crop selects the lesion crop when the record carries an roi.
std::vector<StackedSample> build_samples(const DatasetManifest& manifest, Modality modality,
                                         bool use_crop, int side = kInputSide);

}  // namespace elastofuse::dataio
