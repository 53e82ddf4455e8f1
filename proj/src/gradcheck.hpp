#pragma once

#include <functional>
#include <string>
#include <vector>

#include "train.hpp"

namespace rfp {

struct GradCheckBatch {
  RayBatch rays;
  std::vector<QuadratureSamples> samples;
  std::vector<RayTarget> targets;
  LossConfig config;
};

// Quantities held constant while differentiating: the argmax labels and the
// stop-gradient logits of the straight-through masks, the set of samples in
// the propagation term and the per-object batch means.
struct FrozenBatch {
  std::vector<std::vector<int>> labels;
  std::vector<std::vector<double>> logits;
  std::vector<std::vector<std::uint8_t>> in_prop;
  std::vector<Rgb> mean;
  std::vector<std::size_t> count;
};

FrozenBatch freeze_batch(const SceneModel& model, const GradCheckBatch& batch);

// Direct evaluation of the total loss written from point queries, with masks
// relaxed to one_hot(frozen label) + s(x) - frozen s. At the frozen point it
// equals the training loss; its finite differences give the straight-through
// gradient.
double reference_loss(const SceneModel& model, const GradCheckBatch& batch, const FrozenBatch& frozen);
std::vector<long double> reference_ray_losses(const SceneModel& model, const GradCheckBatch& batch,
                                              const FrozenBatch& frozen);

using GradientFn = std::function<void(SceneModel&, const GradCheckBatch&)>;

// Default analytic path: the training forward/backward.
void analytic_gradient(SceneModel& model, const GradCheckBatch& batch);

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-5;
  // Relative error is |a - n| / max(|a|, |n|, abs_floor).
  double abs_floor = 1e-6;
  int parameters = 200;
  std::uint64_t seed = 0;
  GradientFn gradient = analytic_gradient;
};

struct GradCheckReport {
  int checked = 0;
  double max_rel_error = 0.0;
  double loss_mismatch = 0.0;  // |reference - training| at the base point
  std::string worst;
  bool passed = false;
};

GradCheckReport gradient_check(SceneModel& model, const GradCheckBatch& batch,
                               const GradCheckOptions& options = {});

// Random tiny scene for checking: random grids, rays crossing the volume,
// random targets and initial labels.
struct GradCheckFixture {
  SceneModel model;
  GradCheckBatch batch;
};
GradCheckFixture make_grad_check_fixture(std::uint64_t seed, int num_objects, int resolution,
                                         int sh_degree = 0, int rays = 12, int samples = 16);

}  // namespace rfp
