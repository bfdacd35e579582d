#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace elastofuse::dataio {

/// Planar float image, values in [0, 1], channel-major layout [c][y][x].
/// Channel order for color images is R, G, B.
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int c, int h, int w) : channels(c), height(h), width(w) {
    data.assign(static_cast<std::size_t>(c) * h * w, 0.0f);
  }

  float& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float* plane(int c) { return data.data() + static_cast<std::size_t>(c) * height * width; }
  const float* plane(int c) const {
    return data.data() + static_cast<std::size_t>(c) * height * width;
  }
  bool empty() const { return data.empty(); }
};

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
};

/// Decodes an image file (PNG/JPEG/...). Grayscale files yield 1 channel,
/// color files 3 channels (RGB order), 8-bit scaled to [0, 1].
/// Throws DataError on decode failure.
Image load_image(const std::string& path);

/// Number of channels stored in the file, without full decode conventions
/// applied (1 for gray, 3 for color, 4 for color+alpha).
int image_file_channels(const std::string& path);

/// Writes an 8-bit PNG ([0,1] clamped and quantized). 1 or 3 channels.
void save_png(const std::string& path, const Image& img);

/// Rec.601 luminance collapse of a 3-channel image.
Image to_luminance(const Image& img);

/// Bilinear resample with half-pixel centers. Same-size input is copied
/// bit-exactly. Throws DataError when the target side is < 1 or input empty.
Image resize_bilinear(const Image& img, int out_h, int out_w);

/// Crops [y, y+h) x [x, x+w). Throws DataError when out of bounds or empty.
Image crop(const Image& img, const Rect& roi);

Image hflip(const Image& img);

}  // namespace elastofuse::dataio
