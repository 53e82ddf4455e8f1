#include "features.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"

namespace rfp {

void FeatureMap::validate() const {
  require(dims >= 1, "feature map needs at least one dimension");
  require(data.size() == pixel_count() * static_cast<std::size_t>(dims), "feature map size mismatch");
  for (double v : data)
    if (!std::isfinite(v)) fail(ErrorCode::kNumeric, "feature map holds non-finite values");
}

namespace {

// Separable Gaussian blur of one channel with clamped borders.
std::vector<double> blur(const std::vector<double>& src, int w, int h, double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= sum;
  std::vector<double> tmp(src.size()), out(src.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * src[y * w + std::clamp(x + i, 0, w - 1)];
      tmp[y * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp[std::clamp(y + i, 0, h - 1) * w + x];
      out[y * w + x] = acc;
    }
  return out;
}

std::vector<double> local_std(const std::vector<double>& src, int w, int h, int window) {
  const int r = window / 2;
  std::vector<double> out(src.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0, s2 = 0.0;
      int n = 0;
      for (int j = std::max(0, y - r); j <= std::min(h - 1, y + r); ++j)
        for (int i = std::max(0, x - r); i <= std::min(w - 1, x + r); ++i) {
          const double v = src[j * w + i];
          s += v;
          s2 += v * v;
          ++n;
        }
      const double mean = s / n;
      out[y * w + x] = std::sqrt(std::max(0.0, s2 / n - mean * mean));
    }
  return out;
}

}  // namespace

FeatureMap extract_features(const Image& image, const FeatureOptions& options) {
  require(image.channels >= 3, "feature extraction needs an RGB image");
  require(options.blur_sigma > 0.0 && options.std_window >= 1, "invalid feature options");
  const int w = image.width, h = image.height;
  FeatureMap f;
  f.width = w;
  f.height = h;
  f.dims = kBuiltinFeatureDims;
  f.data.assign(f.pixel_count() * f.dims, 0.0);
  for (int c = 0; c < 3; ++c) {
    std::vector<double> chan(f.pixel_count());
    for (std::size_t p = 0; p < chan.size(); ++p) chan[p] = image.data[p * image.channels + c];
    const auto blurred = blur(chan, w, h, options.blur_sigma);
    const auto dev = local_std(chan, w, h, options.std_window);
    for (std::size_t p = 0; p < chan.size(); ++p) {
      double* v = f.pixel(p);
      v[c] = chan[p];
      v[3 + c] = blurred[p];
      v[6 + c] = dev[p];
    }
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double* v = f.pixel(static_cast<std::size_t>(y) * w + x);
      v[9] = options.spatial_weight * (x + 0.5) / w;
      v[10] = options.spatial_weight * (y + 0.5) / h;
    }
  return f;
}

void write_feature_map(const std::string& path, const FeatureMap& f) {
  f.validate();
  nlohmann::json header = {{"width", f.width}, {"height", f.height}, {"d_v", f.dims}};
  std::vector<float> payload(f.data.begin(), f.data.end());
  write_tagged_binary(path, kFeatureMagic, header, payload);
}

FeatureMap read_feature_map(const std::string& path, int expected_width, int expected_height) {
  const TaggedBinary tb = read_tagged_binary(path, kFeatureMagic);
  FeatureMap f;
  f.source = FeatureSource::kExternal;
  try {
    f.width = tb.header.at("width").get<int>();
    f.height = tb.header.at("height").get<int>();
    f.dims = tb.header.at("d_v").get<int>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, path + ": bad feature header: " + e.what());
  }
  if (f.width <= 0 || f.height <= 0 || f.dims <= 0)
    fail(ErrorCode::kFormat, path + ": non-positive feature map dimensions");
  if (expected_width > 0 && (f.width != expected_width || f.height != expected_height))
    fail(ErrorCode::kFormat, path + ": feature map is " + std::to_string(f.width) + "x" +
                                 std::to_string(f.height) + ", image is " + std::to_string(expected_width) +
                                 "x" + std::to_string(expected_height));
  if (tb.payload.size() != f.pixel_count() * f.dims)
    fail(ErrorCode::kFormat, path + ": payload size does not match the header");
  f.data.assign(tb.payload.begin(), tb.payload.end());
  f.validate();
  return f;
}

}  // namespace rfp
