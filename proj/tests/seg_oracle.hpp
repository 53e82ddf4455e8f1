#pragma once

// Brute-force segmentation scoring for cross-checking the metrics module:
// every permutation of foreground labels is tried on the pooled confusion,
// background pinned, and the best total foreground IoU wins.

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "image.hpp"

namespace oracle {

struct Score {
  double acc = 0.0;
  double miou = 0.0;
  bool unique = true;  // false when two permutations tie on foreground IoU
};

inline Score brute_force(std::span<const rfp::LabelMap> pred, std::span<const rfp::LabelMap> gt, int labels) {
  using Table = std::vector<std::vector<double>>;
  auto table_of = [&](const rfp::LabelMap& p, const rfp::LabelMap& g, Table& t) {
    for (std::size_t i = 0; i < g.labels.size(); ++i)
      if (g.labels[i] != rfp::kUnlabeled) t[g.labels[i]][p.labels[i]] += 1.0;
  };
  auto iou = [&](const Table& t, int g, int p) {
    double row = 0, col = 0;
    for (int q = 0; q < labels; ++q) row += t[g][q];
    for (int q = 0; q < labels; ++q) col += t[q][p];
    const double uni = row + col - t[g][p];
    return uni > 0 ? t[g][p] / uni : -1.0;
  };
  std::vector<Table> views;
  Table pooled(labels, std::vector<double>(labels, 0.0));
  for (std::size_t v = 0; v < gt.size(); ++v) {
    views.emplace_back(labels, std::vector<double>(labels, 0.0));
    table_of(pred[v], gt[v], views.back());
    table_of(pred[v], gt[v], pooled);
  }

  std::vector<int> perm(labels - 1);
  std::iota(perm.begin(), perm.end(), 1);
  double best = -1.0;
  Score out;
  do {
    std::vector<int> map(labels, 0);  // gt -> pred
    for (int g = 1; g < labels; ++g) map[g] = perm[g - 1];
    double fg = 0.0;
    for (int g = 1; g < labels; ++g) fg += std::max(0.0, iou(pooled, g, map[g]));
    if (fg > best + 1e-12) {
      best = fg;
      Score s;
      int counted = 0;
      for (const Table& t : views) {
        double total = 0, correct = 0, sum = 0;
        int n = 0;
        for (int g = 0; g < labels; ++g) {
          for (int q = 0; q < labels; ++q) total += t[g][q];
          correct += t[g][map[g]];
          const double v = iou(t, g, map[g]);
          if (v >= 0.0) {
            sum += v;
            ++n;
          }
        }
        if (total == 0) continue;
        ++counted;
        s.acc += correct / total;
        s.miou += sum / n;
      }
      s.acc /= counted;
      s.miou /= counted;
      out = s;
    } else if (std::abs(fg - best) <= 1e-12) {
      out.unique = false;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

}  // namespace oracle
