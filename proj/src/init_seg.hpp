#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "features.hpp"

namespace rfp {

using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct KMeansOptions {
  int max_iterations = 50;
  double tolerance = 1e-6;  // relative centroid shift
  int restarts = 1;         // independent seedings; the lowest inertia wins
};

struct KMeansResult {
  PointMatrix centroids;
  std::vector<int> assignment;
  int iterations = 0;
  double inertia = 0.0;  // sum of squared distances to the assigned centroid
};

// k-means++ seeding followed by Lloyd iterations. k is reduced (with a warning)
// when there are fewer distinct points than clusters.
KMeansResult kmeans(const PointMatrix& points, int k, std::uint64_t seed, const KMeansOptions& options = {},
                    Warnings* warnings = nullptr);

// Per-view 0/1 masks from one 2-means over all views' pixels. The cluster
// covering the smaller share of image-border pixels is foreground (ties: the
// smaller cluster).
std::vector<LabelMap> split_fg_bg(std::span<const FeatureMap> features, std::uint64_t seed,
                                  const KMeansOptions& options = {}, Warnings* warnings = nullptr);

// Shared K-means over pooled foreground pixels: background 0, cluster c -> c + 1.
std::vector<LabelMap> partition_foreground(std::span<const FeatureMap> features,
                                           std::span<const LabelMap> fg_masks, int k, std::uint64_t seed,
                                           const KMeansOptions& options = {}, Warnings* warnings = nullptr);

struct InitSegOptions {
  int num_objects = 1;
  std::uint64_t seed = 0;
  FeatureOptions features;
  KMeansOptions kmeans;
};

struct InitSegResult {
  std::vector<FeatureMap> features;
  std::vector<LabelMap> labels;
};

InitSegResult bootstrap_segmentation(std::span<const Image> images, const InitSegOptions& options,
                                     Warnings* warnings = nullptr);

}  // namespace rfp
