#include "init_seg.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace rfp {

namespace {

std::size_t count_distinct(const PointMatrix& points, std::size_t cap) {
  std::set<std::vector<double>> seen;
  for (Eigen::Index i = 0; i < points.rows() && seen.size() < cap; ++i)
    seen.emplace(points.row(i).data(), points.row(i).data() + points.cols());
  return seen.size();
}

int nearest(const PointMatrix& centroids, const double* p, Eigen::Index dims, double* dist = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    double d = 0.0;
    for (Eigen::Index j = 0; j < dims; ++j) {
      const double e = p[j] - centroids(c, j);
      d += e * e;
    }
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

PointMatrix pool(std::span<const FeatureMap> features, std::span<const LabelMap> masks, int label) {
  std::size_t n = 0;
  const int dims = features.front().dims;
  for (std::size_t v = 0; v < features.size(); ++v) {
    require(features[v].dims == dims, "feature maps disagree on dimension");
    n += masks.empty() ? features[v].pixel_count() : masks[v].count(label);
  }
  PointMatrix points(n, dims);
  Eigen::Index row = 0;
  for (std::size_t v = 0; v < features.size(); ++v)
    for (std::size_t p = 0; p < features[v].pixel_count(); ++p) {
      if (!masks.empty() && masks[v].labels[p] != label) continue;
      std::copy_n(features[v].pixel(p), dims, points.row(row++).data());
    }
  return points;
}

}  // namespace

namespace {

KMeansResult kmeans_once(const PointMatrix& points, int k, Rng& rng, const KMeansOptions& options) {
  const Eigen::Index n = points.rows(), dims = points.cols();
  KMeansResult r;
  r.centroids.resize(k, dims);
  r.centroids.row(0) = points.row(rng.index(n));
  std::vector<double> d2(n);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      nearest(r.centroids.topRows(c), points.row(i).data(), dims, &d2[i]);
      total += d2[i];
    }
    double target = rng.uniform() * total;
    Eigen::Index pick = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      target -= d2[i];
      if (target < 0.0) {
        pick = i;
        break;
      }
    }
    while (d2[pick] <= 0.0) --pick;  // numerical fall-through lands on a positive-weight point
    r.centroids.row(c) = points.row(pick);
  }

  r.assignment.assign(n, 0);
  for (int it = 0; it < options.max_iterations; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) r.assignment[i] = nearest(r.centroids, points.row(i).data(), dims);
    PointMatrix sums = PointMatrix::Zero(k, dims);
    std::vector<std::size_t> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(r.assignment[i]) += points.row(i);
      ++counts[r.assignment[i]];
    }
    double shift = 0.0, scale = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      const Eigen::RowVectorXd next = sums.row(c) / static_cast<double>(counts[c]);
      shift = std::max(shift, (next - r.centroids.row(c)).norm());
      scale = std::max(scale, next.norm());
      r.centroids.row(c) = next;
    }
    r.iterations = it + 1;
    if (shift <= options.tolerance * std::max(scale, 1e-12)) break;
  }
  r.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double d;
    r.assignment[i] = nearest(r.centroids, points.row(i).data(), dims, &d);
    r.inertia += d;
  }
  return r;
}

}  // namespace

KMeansResult kmeans(const PointMatrix& points, int k, std::uint64_t seed, const KMeansOptions& options,
                    Warnings* warnings) {
  require(k >= 1, "k-means needs k >= 1");
  require(options.restarts >= 1, "k-means needs at least one restart");
  require(points.rows() > 0, "k-means needs at least one point");
  const std::size_t distinct = count_distinct(points, k);
  if (distinct < static_cast<std::size_t>(k)) {
    warn(warnings, "only " + std::to_string(distinct) + " distinct feature vectors for k = " +
                       std::to_string(k) + "; reducing k");
    k = static_cast<int>(distinct);
  }
  Rng rng(seed);
  KMeansResult best = kmeans_once(points, k, rng, options);
  for (int r = 1; r < options.restarts; ++r) {
    KMeansResult next = kmeans_once(points, k, rng, options);
    if (next.inertia < best.inertia) best = std::move(next);
  }
  return best;
}

std::vector<LabelMap> split_fg_bg(std::span<const FeatureMap> features, std::uint64_t seed,
                                  const KMeansOptions& options, Warnings* warnings) {
  require(!features.empty(), "split_fg_bg needs at least one view");
  std::vector<LabelMap> out;
  for (const auto& f : features) out.emplace_back(f.width, f.height, 0);
  const PointMatrix points = pool(features, {}, 0);
  const KMeansResult km = kmeans(points, 2, seed, options, warnings);
  std::size_t size[2] = {0, 0}, border[2] = {0, 0};
  for (int a : km.assignment) ++size[a];
  if (km.centroids.rows() < 2 || size[0] == 0 || size[1] == 0) {
    warn(warnings, "foreground/background clustering is degenerate; labeling everything background");
    return out;
  }
  std::size_t row = 0;
  for (const auto& f : features)
    for (int y = 0; y < f.height; ++y)
      for (int x = 0; x < f.width; ++x, ++row)
        if (x == 0 || y == 0 || x == f.width - 1 || y == f.height - 1) ++border[km.assignment[row]];
  int fg;
  if (border[0] != border[1]) fg = border[0] < border[1] ? 0 : 1;
  else fg = size[0] <= size[1] ? 0 : 1;
  row = 0;
  for (auto& m : out)
    for (auto& l : m.labels) l = km.assignment[row++] == fg ? 1 : 0;
  return out;
}

std::vector<LabelMap> partition_foreground(std::span<const FeatureMap> features,
                                           std::span<const LabelMap> fg_masks, int k, std::uint64_t seed,
                                           const KMeansOptions& options, Warnings* warnings) {
  require(k >= 1, "number of objects must be >= 1");
  require(features.size() == fg_masks.size() && !features.empty(), "one foreground mask per view required");
  std::vector<LabelMap> out(fg_masks.begin(), fg_masks.end());
  for (auto& m : out)
    for (auto& l : m.labels)
      if (l != kUnlabeled) l = l == 1 ? 1 : 0;
  if (k == 1) return out;
  const PointMatrix points = pool(features, fg_masks, 1);
  if (points.rows() == 0) {
    warn(warnings, "no foreground pixels to partition");
    return out;
  }
  const KMeansResult km = kmeans(points, k, seed, options, warnings);
  std::size_t row = 0;
  for (std::size_t v = 0; v < out.size(); ++v)
    for (std::size_t p = 0; p < out[v].labels.size(); ++p)
      if (fg_masks[v].labels[p] == 1) out[v].labels[p] = static_cast<std::uint8_t>(km.assignment[row++] + 1);
  return out;
}

InitSegResult bootstrap_segmentation(std::span<const Image> images, const InitSegOptions& options,
                                     Warnings* warnings) {
  require(!images.empty(), "init-seg needs at least one image");
  InitSegResult r;
  r.features.resize(images.size());
  parallel_for(images.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t v = b; v < e; ++v) r.features[v] = extract_features(images[v], options.features);
  });
  const auto fg = split_fg_bg(r.features, options.seed, options.kmeans, warnings);
  r.labels = partition_foreground(r.features, fg, options.num_objects, options.seed + 1, options.kmeans, warnings);
  return r;
}

}  // namespace rfp
