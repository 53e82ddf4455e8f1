#include "image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include <png.h>

#include "binary_io.hpp"

namespace rfp {

std::vector<std::uint8_t> LabelMap::mask(int k) const {
  std::vector<std::uint8_t> m(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) m[i] = labels[i] == k ? 1 : 0;
  return m;
}

std::size_t LabelMap::count(int k) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), static_cast<std::uint8_t>(k)));
}

int LabelMap::max_label() const {
  int best = -1;
  for (auto l : labels)
    if (l != kUnlabeled) best = std::max(best, static_cast<int>(l));
  return best;
}

namespace {

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_png_bytes(const std::string& path, int width, int height, int channels,
                     const std::vector<std::uint8_t>& bytes) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) fail(ErrorCode::kIo, "cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::kInternal, "libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::kIo, "png encoding failed: " + path);
  }
  png_init_io(png, file.get());
  const int color_type = channels == 1   ? PNG_COLOR_TYPE_GRAY
                         : channels == 3 ? PNG_COLOR_TYPE_RGB
                                         : PNG_COLOR_TYPE_RGBA;
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    png_write_row(png, bytes.data() + static_cast<std::size_t>(y) * width * channels);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::vector<std::uint8_t> read_png_bytes(const std::string& path, int& width, int& height,
                                         int& channels) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) fail(ErrorCode::kIo, "cannot open: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::kInternal, "libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::kFormat, "png decoding failed: " + path);
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_packing(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  channels = png_get_channels(png, info);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(width) * height * channels);
  for (int y = 0; y < height; ++y)
    png_read_row(png, bytes.data() + static_cast<std::size_t>(y) * width * channels, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return bytes;
}

}  // namespace

void quantize_8bit(Image& image) {
  for (float& v : image.data) v = static_cast<float>(to_byte(v)) / 255.0f;
}

void write_png(const std::string& path, const Image& image) {
  require(image.channels == 1 || image.channels == 3 || image.channels == 4,
          "png output supports 1, 3 or 4 channels");
  std::vector<std::uint8_t> bytes(image.data.size());
  std::transform(image.data.begin(), image.data.end(), bytes.begin(), to_byte);
  write_png_bytes(path, image.width, image.height, image.channels, bytes);
}

Image read_png(const std::string& path) {
  int w = 0, h = 0, c = 0;
  const auto bytes = read_png_bytes(path, w, h, c);
  Image image(w, h, c);
  for (std::size_t i = 0; i < bytes.size(); ++i) image.data[i] = static_cast<float>(bytes[i]) / 255.0f;
  return image;
}

void write_label_png(const std::string& path, const LabelMap& labels) {
  write_png_bytes(path, labels.width, labels.height, 1, labels.labels);
}

LabelMap read_label_png(const std::string& path) {
  int w = 0, h = 0, c = 0;
  auto bytes = read_png_bytes(path, w, h, c);
  if (c != 1) fail(ErrorCode::kFormat, path + ": label maps must be 8-bit grayscale");
  LabelMap out;
  out.width = w;
  out.height = h;
  out.labels = std::move(bytes);
  return out;
}

void write_float_image(const std::string& path, const Image& image) {
  nlohmann::json header{{"width", image.width}, {"height", image.height}, {"channels", image.channels}};
  write_tagged_binary(path, kFloatImageMagic, header, image.data);
}

Image read_float_image(const std::string& path) {
  auto blob = read_tagged_binary(path, kFloatImageMagic);
  Image image;
  image.width = blob.header.at("width").get<int>();
  image.height = blob.header.at("height").get<int>();
  image.channels = blob.header.at("channels").get<int>();
  if (blob.payload.size() != image.pixel_count() * image.channels)
    fail(ErrorCode::kFormat, path + ": payload size does not match header");
  image.data = std::move(blob.payload);
  return image;
}

}  // namespace rfp
