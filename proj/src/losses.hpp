#pragma once

#include <limits>
#include <span>
#include <vector>

#include "render.hpp"

namespace rfp {

struct LossWeights {
  double lambda_prop = 0.01;
  double lambda_init = 1.0;
  void validate() const;
};

// Options of the bidirectional photometric term.
struct PhotoOptions {
  // Per-ray cap on the maximized squared error (sum over RGB). Infinity gives
  // the unclamped loss.
  double clamp = 0.75;
  bool negative_term = true;
  // Which grids the subtracted term is allowed to update.
  bool negative_updates_density = true;
  bool negative_updates_semantics = true;
  bool negative_updates_colors = true;
};

struct LossConfig {
  LossWeights weights;
  PhotoOptions photo;
  // Samples whose rendering weight is below this threshold are left out of the
  // propagation regularizer and of the per-object means. 0 keeps every sample.
  double prop_min_weight = 1e-3;
};

// Per-object mean colors over in-mask samples of a batch. Means are constants
// for differentiation; objects with no in-mask sample have count 0.
struct BatchStats {
  std::vector<Rgb> mean;
  std::vector<std::size_t> count;
};

struct LossBreakdown {
  double photo_pos = 0.0;  // sum_r |C^ - C|^2
  double photo_neg = 0.0;  // normalized sum of clamped erroneous errors (subtracted)
  double prop = 0.0;
  double init = 0.0;
  double total = 0.0;

  double photo() const { return photo_pos - photo_neg; }
};

// dLoss / d(field outputs) for each sample of one ray.
struct RayGradient {
  std::vector<double> raw_density;  // samples
  std::vector<double> logits;       // samples x labels
  std::vector<double> colors;       // samples x labels x 3, w.r.t. sigmoid output
};

// Supervision attached to one ray of a batch.
struct RayTarget {
  Rgb color = Rgb::Zero();
  int init_label = -1;  // -1: no initial label
};

// Single-object propagation term over per-sample colors (n x channels):
// sum over out-of-mask samples of |c - mu|^2 with mu the in-mask mean.
// grad_mask is d/dm where m is the in-mask indicator (1 - m inverted mask).
double propagation_term(std::span<const double> colors, std::span<const std::uint8_t> in_mask,
                        int channels, std::span<double> grad_colors = {},
                        std::span<double> grad_mask = {});

// Clamped cross-entropy -log softmax(logits)[target]; log clamped at log(1e-8).
double init_cross_entropy(std::span<const double> logits, int target, std::span<double> grad = {});

BatchStats compute_batch_stats(std::span<const RayTrace> traces, double min_weight);

// Loss of one ray plus (optionally) its per-sample gradient. pair_scale is
// 1 / (K (K + 1)).
LossBreakdown ray_loss(const RayTrace& trace, const RayTarget& target, const BatchStats& stats,
                       const LossConfig& config, RayGradient* grad);

// Batch losses. Ray contributions are summed in ray order; grads is resized to
// the batch when given.
LossBreakdown batch_loss(std::span<const RayTrace> traces, std::span<const RayTarget> targets,
                         const LossConfig& config, std::vector<RayGradient>* grads,
                         BatchStats* stats_out = nullptr);

// Individual terms over a batch, for inspection.
double loss_prop(std::span<const RayTrace> traces, const LossConfig& config);
double loss_photo_bidirectional(std::span<const RayTrace> traces, std::span<const RayTarget> targets,
                                const PhotoOptions& options);
double loss_init(std::span<const RayTrace> traces, std::span<const RayTarget> targets);
double total_loss(double photo, double prop, double init, const LossWeights& weights);

}  // namespace rfp
