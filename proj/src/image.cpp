#include "elastofuse/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>

#include "elastofuse/errors.hpp"

namespace elastofuse::dataio {

namespace {

cv::Mat read_unchanged(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (m.empty()) throw DataError("cannot decode image: " + path);
  if (m.depth() != CV_8U) throw DataError("expected 8-bit image: " + path);
  return m;
}

}  // namespace

int image_file_channels(const std::string& path) {
  return read_unchanged(path).channels();
}

Image load_image(const std::string& path) {
  cv::Mat m = read_unchanged(path);
  const int ch = m.channels();
  if (ch != 1 && ch != 3)
    throw DataError("unsupported channel count " + std::to_string(ch) + ": " + path);
  Image img(ch, m.rows, m.cols);
  constexpr float kScale = 1.0f / 255.0f;
  for (int y = 0; y < m.rows; ++y) {
    const std::uint8_t* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < m.cols; ++x) {
      if (ch == 1) {
        img.at(0, y, x) = row[x] * kScale;
      } else {
        // OpenCV stores BGR
        img.at(0, y, x) = row[x * 3 + 2] * kScale;
        img.at(1, y, x) = row[x * 3 + 1] * kScale;
        img.at(2, y, x) = row[x * 3 + 0] * kScale;
      }
    }
  }
  return img;
}

void save_png(const std::string& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    throw DataError("save_png supports 1 or 3 channels");
  cv::Mat m(img.height, img.width, img.channels == 1 ? CV_8UC1 : CV_8UC3);
  auto quant = [](float v) {
    float c = std::clamp(v, 0.0f, 1.0f);
    return static_cast<std::uint8_t>(std::lround(c * 255.0f));
  };
  for (int y = 0; y < img.height; ++y) {
    std::uint8_t* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.width; ++x) {
      if (img.channels == 1) {
        row[x] = quant(img.at(0, y, x));
      } else {
        row[x * 3 + 0] = quant(img.at(2, y, x));
        row[x * 3 + 1] = quant(img.at(1, y, x));
        row[x * 3 + 2] = quant(img.at(0, y, x));
      }
    }
  }
  if (!cv::imwrite(path, m, {cv::IMWRITE_PNG_COMPRESSION, 6}))
    throw DataError("cannot write image: " + path);
}

Image to_luminance(const Image& img) {
  if (img.channels == 1) return img;
  if (img.channels != 3) throw DataError("luminance expects 1 or 3 channels");
  Image out(1, img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out.at(0, y, x) = 0.299f * img.at(0, y, x) + 0.587f * img.at(1, y, x) +
                        0.114f * img.at(2, y, x);
  return out;
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw DataError("resize target must be >= 1 pixel");
  if (img.empty()) throw DataError("resize of empty image");
  Image out(img.channels, out_h, out_w);
  const float sy = static_cast<float>(img.height) / static_cast<float>(out_h);
  const float sx = static_cast<float>(img.width) / static_cast<float>(out_w);
  for (int c = 0; c < img.channels; ++c) {
    const float* src = img.plane(c);
    float* dst = out.plane(c);
    for (int oy = 0; oy < out_h; ++oy) {
      float fy = (oy + 0.5f) * sy - 0.5f;
      fy = std::clamp(fy, 0.0f, static_cast<float>(img.height - 1));
      const int y0 = static_cast<int>(fy);
      const int y1 = std::min(y0 + 1, img.height - 1);
      const float wy = fy - static_cast<float>(y0);
      for (int ox = 0; ox < out_w; ++ox) {
        float fx = (ox + 0.5f) * sx - 0.5f;
        fx = std::clamp(fx, 0.0f, static_cast<float>(img.width - 1));
        const int x0 = static_cast<int>(fx);
        const int x1 = std::min(x0 + 1, img.width - 1);
        const float wx = fx - static_cast<float>(x0);
        const float top = src[y0 * img.width + x0] * (1.0f - wx) + src[y0 * img.width + x1] * wx;
        const float bot = src[y1 * img.width + x0] * (1.0f - wx) + src[y1 * img.width + x1] * wx;
        dst[oy * out_w + ox] = top * (1.0f - wy) + bot * wy;
      }
    }
  }
  return out;
}

Image crop(const Image& img, const Rect& roi) {
  if (roi.w <= 0 || roi.h <= 0) throw DataError("crop rectangle has zero area");
  if (roi.x < 0 || roi.y < 0 || roi.x + roi.w > img.width || roi.y + roi.h > img.height)
    throw DataError("crop rectangle out of bounds");
  Image out(img.channels, roi.h, roi.w);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < roi.h; ++y)
      for (int x = 0; x < roi.w; ++x)
        out.at(c, y, x) = img.at(c, roi.y + y, roi.x + x);
  return out;
}

Image hflip(const Image& img) {
  Image out(img.channels, img.height, img.width);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
  return out;
}

}  // namespace elastofuse::dataio
