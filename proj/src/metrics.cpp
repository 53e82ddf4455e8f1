#include "metrics.hpp"

#include <algorithm>
#include <cmath>

namespace rfp {

namespace {

void check_pair(const LabelMap& a, const LabelMap& b) {
  require(a.width == b.width && a.height == b.height, "label maps differ in resolution");
}

void check_pair(const Image& a, const Image& b) {
  require(a.width == b.width && a.height == b.height && a.channels == b.channels,
          "images differ in resolution or channel count");
}

double class_iou(const Confusion& c, int g, int p) {
  std::uint64_t row = 0, col = 0;
  for (auto v : c[g]) row += v;
  if (p >= 0)
    for (const auto& r : c) col += r[p];
  const std::uint64_t inter = p >= 0 ? c[g][p] : 0;
  const std::uint64_t uni = row + col - inter;
  return uni == 0 ? -1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

Confusion confusion_matrix(const LabelMap& pred, const LabelMap& gt, int n_pred, int n_gt) {
  check_pair(pred, gt);
  Confusion c(n_gt, std::vector<std::uint64_t>(n_pred, 0));
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const int g = gt.labels[i];
    if (g == kUnlabeled) continue;
    const int p = pred.labels[i];
    require(g < n_gt, "ground-truth label out of range");
    require(p != kUnlabeled && p < n_pred, "predicted label out of range");
    ++c[g][p];
  }
  return c;
}

// Kuhn-Munkres with potentials on a square padding of the cost matrix.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost) {
  const int rows = static_cast<int>(cost.size());
  const int cols = rows ? static_cast<int>(cost[0].size()) : 0;
  const int n = std::max(rows, cols);
  if (n == 0) return {};
  auto at = [&](int i, int j) { return (i < rows && j < cols) ? cost[i][j] : 0.0; };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> result(rows, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] - 1 < rows && j - 1 < cols) result[p[j] - 1] = j - 1;
  return result;
}

SegMetrics seg_metrics(std::span<const LabelMap> pred, std::span<const LabelMap> gt) {
  require(!pred.empty() && pred.size() == gt.size(), "seg_metrics needs matching, non-empty view lists");
  int n_gt = 1, n_pred = 1;
  for (std::size_t v = 0; v < gt.size(); ++v) {
    check_pair(pred[v], gt[v]);
    n_gt = std::max(n_gt, gt[v].max_label() + 1);
    n_pred = std::max(n_pred, pred[v].max_label() + 1);
  }

  std::vector<Confusion> per_view;
  Confusion pooled(n_gt, std::vector<std::uint64_t>(n_pred, 0));
  for (std::size_t v = 0; v < gt.size(); ++v) {
    per_view.push_back(confusion_matrix(pred[v], gt[v], n_pred, n_gt));
    for (int g = 0; g < n_gt; ++g)
      for (int p = 0; p < n_pred; ++p) pooled[g][p] += per_view.back()[g][p];
  }

  // Foreground matching on pooled IoU; background stays 0 -> 0.
  SegMetrics m;
  m.matching.assign(n_pred, -1);
  m.matching[0] = 0;
  std::vector<int> gt_of_pred(n_pred, -1), pred_of_gt(n_gt, -1);
  gt_of_pred[0] = 0;
  pred_of_gt[0] = 0;
  if (n_gt > 1 && n_pred > 1) {
    std::vector<std::vector<double>> cost(n_gt - 1, std::vector<double>(n_pred - 1));
    for (int g = 1; g < n_gt; ++g)
      for (int p = 1; p < n_pred; ++p) cost[g - 1][p - 1] = -std::max(0.0, class_iou(pooled, g, p));
    const auto assign = solve_assignment(cost);
    for (int g = 1; g < n_gt; ++g) {
      const int p = assign[g - 1];
      if (p < 0) continue;
      pred_of_gt[g] = p + 1;
      gt_of_pred[p + 1] = g;
    }
  }
  m.matching = gt_of_pred;

  std::vector<double> iou_sum(n_gt, 0.0);
  std::vector<int> iou_n(n_gt, 0);
  double acc_sum = 0.0, miou_sum = 0.0;
  int views_counted = 0;
  for (const auto& c : per_view) {
    std::uint64_t total = 0, correct = 0;
    for (int g = 0; g < n_gt; ++g)
      for (int p = 0; p < n_pred; ++p) {
        total += c[g][p];
        if (gt_of_pred[p] == g) correct += c[g][p];
      }
    if (total == 0) continue;
    ++views_counted;
    acc_sum += static_cast<double>(correct) / static_cast<double>(total);
    double view_sum = 0.0;
    int view_n = 0;
    for (int g = 0; g < n_gt; ++g) {
      const double iou = class_iou(c, g, pred_of_gt[g]);
      if (iou < 0.0) continue;
      view_sum += iou;
      ++view_n;
      iou_sum[g] += iou;
      ++iou_n[g];
    }
    miou_sum += view_sum / view_n;
  }
  require(views_counted > 0, "seg_metrics: no labeled ground-truth pixels");
  m.acc = acc_sum / views_counted;
  m.miou = miou_sum / views_counted;
  m.per_class_iou.resize(n_gt);
  for (int g = 0; g < n_gt; ++g) m.per_class_iou[g] = iou_n[g] ? iou_sum[g] / iou_n[g] : 0.0;
  return m;
}

SegMetrics seg_metrics(const LabelMap& pred, const LabelMap& gt) {
  return seg_metrics(std::span<const LabelMap>(&pred, 1), std::span<const LabelMap>(&gt, 1));
}

double psnr(const Image& a, const Image& b) {
  check_pair(a, b);
  double se = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    se += d * d;
  }
  if (se == 0.0) return kPsnrIdentical;
  const double mse = se / static_cast<double>(a.data.size());
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& a, const Image& b) {
  check_pair(a, b);
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5, kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
  require(a.width >= kWin && a.height >= kWin, "ssim needs images of at least 11x11");
  double g[kWin], gsum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double x = i - kWin / 2;
    g[i] = std::exp(-x * x / (2.0 * kSigma * kSigma));
    gsum += g[i];
  }
  for (double& w : g) w /= gsum;

  const int ow = a.width - kWin + 1, oh = a.height - kWin + 1;
  double total = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    double chan = 0.0;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int j = 0; j < kWin; ++j) {
          for (int i = 0; i < kWin; ++i) {
            const double w = g[i] * g[j];
            const double va = a.at(x + i, y + j, c), vb = b.at(x + i, y + j, c);
            mx += w * va;
            my += w * vb;
            sxx += w * va * va;
            syy += w * vb * vb;
            sxy += w * va * vb;
          }
        }
        const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
        chan += ((2 * mx * my + kC1) * (2 * cxy + kC2)) / ((mx * mx + my * my + kC1) * (vx + vy + kC2));
      }
    }
    total += chan / (static_cast<double>(ow) * oh);
  }
  return total / a.channels;
}

}  // namespace rfp
