#pragma once

#include <functional>
#include <string>
#include <vector>

#include "losses.hpp"
#include "optimizer.hpp"

namespace rfp {

struct TrainConfig {
  int iterations = 20000;
  int batch_size = 256;
  int samples = 128;
  bool stratified = true;
  double learning_rate = 0.02;
  double lr_decay = 0.1;  // total multiplicative decay over the run
  AdamOptions adam;
  std::uint64_t seed = 0;
  LossConfig loss;
  double lambda_init_floor = 0.04;
  double init_anneal_fraction = 0.4;

  void validate() const;
  // lambda_init annealed linearly from loss.weights.lambda_init to the floor.
  double lambda_init_at(int iteration) const;
  double learning_rate_at(int iteration) const;
};

// Every supervised pixel of the training views as a ray with its target.
struct TrainingRays {
  RayBatch rays;
  std::vector<RayTarget> targets;
  std::size_t size() const { return rays.size(); }
};

struct LossRecord {
  int iteration = 0;
  LossBreakdown loss;
};

struct TrainResult {
  std::vector<LossRecord> trace;
};

// Runs the forward pass for a list of rays with given samples.
void trace_batch(const SceneModel& model, const RayBatch& rays,
                 std::span<const QuadratureSamples> samples, std::vector<RayTrace>& traces);

// Adds per-sample output gradients of one ray into the model's gradient buffers.
void accumulate_gradients(SceneModel& model, const RayTrace& trace, const RayGradient& grad,
                          TouchedCells* touched = nullptr);

// Zeroes the gradient buffers, then fills them with d(batch loss)/d(parameters).
LossBreakdown compute_gradients(SceneModel& model, const RayBatch& rays,
                                std::span<const QuadratureSamples> samples,
                                std::span<const RayTarget> targets, const LossConfig& config);

using TrainCallback = std::function<void(const LossRecord&)>;

TrainResult train(SceneModel& model, const TrainingRays& data, const TrainConfig& config,
                  const TrainCallback& on_iteration = {});

void write_loss_csv(const std::string& path, const std::vector<LossRecord>& trace);

}  // namespace rfp
