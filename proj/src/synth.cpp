#include "elastofuse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "elastofuse/errors.hpp"
#include "elastofuse/image.hpp"
#include "elastofuse/rng.hpp"

namespace fs = std::filesystem;

namespace elastofuse::dataio {

SignalChannels signal_from_code(const std::string& code) {
  if (code == "gray") return SignalChannels::GrayOnly;
  if (code == "color") return SignalChannels::ColorOnly;
  if (code == "both") return SignalChannels::Both;
  throw ConfigError("unknown signal mode: " + code + " (expected gray|color|both)");
}

const char* signal_code(SignalChannels s) {
  switch (s) {
    case SignalChannels::GrayOnly: return "gray";
    case SignalChannels::ColorOnly: return "color";
    case SignalChannels::Both: return "both";
  }
  return "?";
}

void SynthConfig::validate() const {
  if (n_patients < 2) throw ConfigError("n_patients must be >= 2");
  if (images_min < 1 || images_max < images_min)
    throw ConfigError("images_per_patient range invalid");
  if (class_balance <= 0.0 || class_balance >= 1.0)
    throw ConfigError("class_balance must lie in (0, 1)");
  if (image_size < 48) throw ConfigError("image_size must be >= 48");
}

namespace {

// Star-convex lesion boundary: radius as a function of polar angle.
struct LesionShape {
  double cx, cy;        // center in pixels
  double rx, ry;        // base semi-axes
  double rot;           // ellipse rotation
  bool spiculated;
  double spike_amp1, spike_amp2;
  int spike_freq1, spike_freq2;
  double phase1, phase2;

  double boundary(double theta) const {
    if (!spiculated) return 1.0 + 0.04 * std::sin(3.0 * theta + phase1);
    return 1.0 + spike_amp1 * std::sin(spike_freq1 * theta + phase1) +
           spike_amp2 * std::sin(spike_freq2 * theta + phase2);
  }

  // Signed blend factor in [0,1]: 1 deep inside, 0 outside, feathered edge.
  double coverage(double px, double py, double feather) const {
    const double dx = px - cx, dy = py - cy;
    const double c = std::cos(rot), s = std::sin(rot);
    const double u = (dx * c + dy * s) / rx;
    const double v = (-dx * s + dy * c) / ry;
    const double rho = std::sqrt(u * u + v * v);
    const double theta = std::atan2(v, u);
    const double edge = boundary(theta);
    // feather measured in normalized radius units
    const double t = (edge - rho) / feather;
    return std::clamp(t, 0.0, 1.0);
  }

  double max_extent() const {
    const double amp = spiculated ? (spike_amp1 + spike_amp2) : 0.05;
    return std::max(rx, ry) * (1.0 + amp);
  }
};

LesionShape draw_shape(Rng& rng, bool malignant, int size) {
  LesionShape sh;
  const double s = static_cast<double>(size);
  sh.cx = s * rng.uniform(0.34, 0.66);
  sh.cy = s * rng.uniform(0.34, 0.66);
  const double base = s * rng.uniform(0.14, 0.20);
  sh.rx = base * rng.uniform(0.85, 1.25);
  sh.ry = base * rng.uniform(0.75, 1.0);
  sh.rot = rng.uniform(0.0, M_PI);
  sh.spiculated = malignant;
  sh.spike_freq1 = 7 + static_cast<int>(rng.uniform_int(4));
  sh.spike_freq2 = 13 + static_cast<int>(rng.uniform_int(6));
  sh.spike_amp1 = rng.uniform(0.16, 0.24);
  sh.spike_amp2 = rng.uniform(0.08, 0.14);
  sh.phase1 = rng.uniform(0.0, 2.0 * M_PI);
  sh.phase2 = rng.uniform(0.0, 2.0 * M_PI);
  return sh;
}

Rect shape_bbox(const LesionShape& sh, int size) {
  const double ext = sh.max_extent() + 3.0;
  int x0 = std::max(0, static_cast<int>(std::floor(sh.cx - ext)));
  int y0 = std::max(0, static_cast<int>(std::floor(sh.cy - ext)));
  int x1 = std::min(size - 1, static_cast<int>(std::ceil(sh.cx + ext)));
  int y1 = std::min(size - 1, static_cast<int>(std::ceil(sh.cy + ext)));
  return Rect{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

// B-mode phantom: speckle background; benign lesions are dark and smooth,
// malignant lesions bright and textured. When informative=false both classes
// draw the same neutral lesion appearance.
Image render_bmode(const LesionShape& sh, bool malignant, bool informative, Rng& rng,
                   int size) {
  Image img(1, size, size);
  const double bg = 0.38;
  double interior;
  double texture;
  if (!informative) {
    interior = 0.30;
    texture = 0.03;
  } else if (malignant) {
    interior = rng.uniform(0.60, 0.68);
    texture = 0.07;
  } else {
    interior = rng.uniform(0.12, 0.18);
    texture = 0.02;
  }
  for (int y = 0; y < size; ++y) {
    const double gain = 1.0 - 0.10 * (static_cast<double>(y) / size);  // depth attenuation
    for (int x = 0; x < size; ++x) {
      const double a = sh.coverage(x, y, 0.06);
      double v = bg * gain + rng.normal(0.0, 0.05);
      if (a > 0.0) {
        const double lesion = interior + rng.normal(0.0, texture);
        v = (1.0 - a) * v + a * lesion;
      }
      img.at(0, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return img;
}

// Strain-map phantom: greenish background; soft (benign) lesions render
// red-dominant, hard (malignant) lesions blue-dominant. When
// informative=false the lesion hue is a class-independent random tint.
Image render_elasto(const LesionShape& sh, bool malignant, bool informative, Rng& rng,
                    int size) {
  Image img(3, size, size);
  const double bg[3] = {0.22, 0.58, 0.30};
  double lesion[3];
  if (!informative) {
    const double tint = rng.uniform(-0.08, 0.08);
    lesion[0] = 0.42 + tint;
    lesion[1] = 0.44;
    lesion[2] = 0.42 - tint;
  } else if (malignant) {
    lesion[0] = rng.uniform(0.05, 0.15);
    lesion[1] = rng.uniform(0.15, 0.25);
    lesion[2] = rng.uniform(0.78, 0.92);
  } else {
    lesion[0] = rng.uniform(0.78, 0.92);
    lesion[1] = rng.uniform(0.20, 0.30);
    lesion[2] = rng.uniform(0.08, 0.18);
  }
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double a = sh.coverage(x, y, 0.10);
      for (int c = 0; c < 3; ++c) {
        double v = bg[c] + rng.normal(0.0, 0.04);
        if (a > 0.0) v = (1.0 - a) * v + a * (lesion[c] + rng.normal(0.0, 0.02));
        img.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return img;
}

const char* kBenignTypes[] = {"fibroadenoma", "fibrocystic", "cyst", "fat necrosis"};
const char* kMalignantTypes[] = {"IDC", "ILC", "DCIS", "tubular carcinoma"};

}  // namespace

DatasetManifest generate_synthetic(const SynthConfig& config, const std::string& out_dir) {
  config.validate();
  const fs::path root(out_dir);
  const fs::path img_dir = root / "images";
  std::error_code ec;
  fs::create_directories(img_dir, ec);
  if (ec || !fs::is_directory(img_dir))
    throw DataError("unwritable output directory: " + out_dir);

  const int n_benign =
      static_cast<int>(std::llround(config.n_patients * config.class_balance));

  DatasetManifest manifest;
  char buf[64];
  for (int p = 0; p < config.n_patients; ++p) {
    const bool malignant = p >= n_benign;
    Rng prng = named_rng(config.seed, "synth.patient", static_cast<std::uint64_t>(p));

    PatientRecord patient;
    std::snprintf(buf, sizeof(buf), "p%03d", p);
    patient.patient_id = buf;
    patient.label = malignant ? Label::Malignant : Label::Benign;
    if (malignant) {
      patient.histological_type = kMalignantTypes[prng.uniform_int(4)];
      patient.strain_ratio = prng.uniform(2.0, 18.0);
    } else {
      patient.histological_type = kBenignTypes[prng.uniform_int(4)];
      patient.strain_ratio = prng.uniform(0.2, 4.5);
    }

    const int span = config.images_max - config.images_min + 1;
    const int n_images = config.images_min + static_cast<int>(prng.uniform_int(span));
    for (int i = 0; i < n_images; ++i) {
      Rng irng = named_rng(config.seed, "synth.image",
                           static_cast<std::uint64_t>(p) * 1000 + i);
      const LesionShape shape = draw_shape(irng, malignant, config.image_size);
      const bool gray_informative = config.signal != SignalChannels::ColorOnly;
      const bool color_informative = config.signal != SignalChannels::GrayOnly;
      Image bmode = render_bmode(shape, malignant, gray_informative, irng, config.image_size);
      Image elasto = render_elasto(shape, malignant, color_informative, irng, config.image_size);

      ImageRecord rec;
      std::snprintf(buf, sizeof(buf), "%s_i%02d", patient.patient_id.c_str(), i);
      rec.image_id = buf;
      rec.patient_id = patient.patient_id;
      rec.roi = shape_bbox(shape, config.image_size);
      const std::string bname = rec.image_id + "_b.png";
      const std::string ename = rec.image_id + "_se.png";
      save_png((img_dir / bname).string(), bmode);
      save_png((img_dir / ename).string(), elasto);
      rec.bmode_path = (img_dir / bname).string();
      rec.elasto_path = (img_dir / ename).string();
      manifest.add(patient, rec);
    }
  }

  write_manifest((root / "manifest.tsv").string(), manifest);
  return manifest;
}

}  // namespace elastofuse::dataio
