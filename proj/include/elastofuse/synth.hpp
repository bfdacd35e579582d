#pragma once

#include <cstdint>
#include <string>

#include "elastofuse/manifest.hpp"

namespace elastofuse::dataio {

/// Which modality carries the benign/malignant signal. The non-designated
/// modality is generated class-uninformative.
enum class SignalChannels { GrayOnly, ColorOnly, Both };

SignalChannels signal_from_code(const std::string& code);
const char* signal_code(SignalChannels s);

struct SynthConfig {
  int n_patients = 40;
  int images_min = 3;
  int images_max = 5;
  double class_balance = 0.5;  // fraction of benign patients
  SignalChannels signal = SignalChannels::Both;
  int image_size = 256;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Writes phantom B-mode and elastography PNG pairs plus a manifest
/// (manifest.tsv) under out_dir. Benign lesions are smooth ellipses rendering
/// soft (red-dominant) in the strain map; malignant lesions are spiculated
/// and render hard (blue-dominant). Each record's roi is the lesion bounding
/// box. Deterministic under config.seed.
DatasetManifest generate_synthetic(const SynthConfig& config, const std::string& out_dir);

}  // namespace elastofuse::dataio
