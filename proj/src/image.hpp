#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "common.hpp"

namespace rfp {

// Interleaved float image, values nominally in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  float& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  float at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  Rgb rgb(std::size_t pixel) const {
    const float* p = data.data() + pixel * channels;
    return Rgb(p[0], p[1], p[2]);
  }
  bool operator==(const Image&) const = default;
};

inline constexpr std::uint8_t kUnlabeled = 255;

// Per-pixel instance labels; kUnlabeled marks pixels without a label.
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;

  LabelMap() = default;
  LabelMap(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), labels(static_cast<std::size_t>(w) * h, fill) {}

  std::size_t pixel_count() const { return labels.size(); }
  std::vector<std::uint8_t> mask(int k) const;
  std::size_t count(int k) const;
  int max_label() const;  // ignoring kUnlabeled; -1 if none
  bool operator==(const LabelMap&) const = default;
};

// Round to the nearest 8-bit level so stored images survive a PNG round trip.
void quantize_8bit(Image& image);

void write_png(const std::string& path, const Image& image);  // 1, 3 or 4 channels
Image read_png(const std::string& path);                       // RGB(A) or gray as stored
void write_label_png(const std::string& path, const LabelMap& labels);
LabelMap read_label_png(const std::string& path);

inline constexpr const char* kFloatImageMagic = "RFPIMGF1";
void write_float_image(const std::string& path, const Image& image);
Image read_float_image(const std::string& path);

}  // namespace rfp
