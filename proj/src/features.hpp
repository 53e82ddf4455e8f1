#pragma once

#include <string>
#include <vector>

#include "image.hpp"

namespace rfp {

enum class FeatureSource { kBuiltin, kExternal };

// Row-major per-pixel feature vectors.
struct FeatureMap {
  int width = 0;
  int height = 0;
  int dims = 0;
  FeatureSource source = FeatureSource::kBuiltin;
  std::vector<double> data;

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  const double* pixel(std::size_t i) const { return data.data() + i * dims; }
  double* pixel(std::size_t i) { return data.data() + i * dims; }
  void validate() const;
};

struct FeatureOptions {
  double blur_sigma = 2.0;
  int std_window = 5;
  double spatial_weight = 0.3;
};

inline constexpr int kBuiltinFeatureDims = 11;

// RGB, Gaussian-blurred RGB, per-channel local standard deviation and
// normalized (x, y) in [0, 1] times spatial_weight.
FeatureMap extract_features(const Image& image, const FeatureOptions& options = {});

inline constexpr const char* kFeatureMagic = "RFPFEAT1";
void write_feature_map(const std::string& path, const FeatureMap& features);
// Rejects files whose header resolution differs from the expected one
// (pass 0 to skip the check).
FeatureMap read_feature_map(const std::string& path, int expected_width = 0, int expected_height = 0);

}  // namespace rfp
