#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "image.hpp"

namespace rfp {

// confusion[g][p] = pixels with ground truth g and prediction p. Unlabeled
// ground-truth pixels are skipped.
using Confusion = std::vector<std::vector<std::uint64_t>>;
Confusion confusion_matrix(const LabelMap& pred, const LabelMap& gt, int n_pred, int n_gt);

// Minimum-cost one-to-one assignment on a rectangular cost matrix;
// result[row] = column or -1 when rows outnumber columns.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost);

struct SegMetrics {
  double acc = 0.0;
  double miou = 0.0;
  std::vector<double> per_class_iou;  // indexed by ground-truth label
  std::vector<int> matching;          // predicted label -> ground-truth label, -1 if unmatched
};

// One IoU-maximizing matching (background pinned to background) is found on the
// confusion pooled over all views; acc and mIoU are then computed per view and
// averaged. Classes absent from a view in both maps do not enter its mean.
SegMetrics seg_metrics(std::span<const LabelMap> pred, std::span<const LabelMap> gt);
SegMetrics seg_metrics(const LabelMap& pred, const LabelMap& gt);

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

double psnr(const Image& render, const Image& reference);
// 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, L = 1, valid region,
// averaged over channels.
double ssim(const Image& render, const Image& reference);

}  // namespace rfp
