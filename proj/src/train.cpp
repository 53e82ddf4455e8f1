#include "train.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

namespace rfp {

void TrainConfig::validate() const {
  require(iterations >= 0, "iterations must be >= 0");
  require(batch_size >= 1, "batch size must be >= 1");
  require(samples >= 2, "samples per ray must be >= 2");
  require(learning_rate > 0.0, "learning rate must be > 0");
  require(lr_decay > 0.0, "lr_decay must be > 0");
  require(init_anneal_fraction >= 0.0 && init_anneal_fraction <= 1.0,
          "init_anneal_fraction must lie in [0, 1]");
  require(lambda_init_floor >= 0.0, "lambda_init_floor must be >= 0");
  require(loss.photo.clamp > 0.0, "clamp margin must be > 0");
  require(loss.prop_min_weight >= 0.0, "prop_min_weight must be >= 0");
  loss.weights.validate();
}

double TrainConfig::lambda_init_at(int iteration) const {
  const double start = loss.weights.lambda_init;
  const double floor = std::min(lambda_init_floor, start);
  const double horizon = init_anneal_fraction * iterations;
  if (horizon <= 0.0 || iteration >= horizon) return floor;
  return start + (floor - start) * (iteration / horizon);
}

double TrainConfig::learning_rate_at(int iteration) const {
  if (iterations <= 0) return learning_rate;
  return learning_rate * std::pow(lr_decay, static_cast<double>(iteration) / iterations);
}

void trace_batch(const SceneModel& model, const RayBatch& rays,
                 std::span<const QuadratureSamples> samples, std::vector<RayTrace>& traces) {
  traces.resize(rays.size());
  static const QuadratureSamples kEmpty;
  parallel_for(rays.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r)
      trace_ray(model, rays.origins[r], rays.directions[r], rays.valid[r] ? samples[r] : kEmpty,
                traces[r], true);
  });
}

void accumulate_gradients(SceneModel& model, const RayTrace& tr, const RayGradient& grad,
                          TouchedCells* touched) {
  const int L = tr.labels;
  const int B = tr.basis_count;
  double coeff_grad[27];
  for (int p = 0; p < tr.samples; ++p) {
    const Stencil& st = tr.stencils[p];
    if (touched)
      for (int c = 0; c < 8; ++c)
        if (st.weight[c] != 0.0) touched->add(st.cell[c]);
    model.density().scatter_gradient(st, std::span<const double>(&grad.raw_density[p], 1));
    model.semantics().scatter_gradient(
        st, std::span<const double>(grad.logits.data() + static_cast<std::size_t>(p) * L, L));
    for (int k = 0; k < L; ++k) {
      const double* dc = grad.colors.data() + (static_cast<std::size_t>(p) * L + k) * 3;
      if (dc[0] == 0.0 && dc[1] == 0.0 && dc[2] == 0.0) continue;
      const double* c = tr.color(p, k);
      for (int ch = 0; ch < 3; ++ch) {
        const double pre = dc[ch] * c[ch] * (1.0 - c[ch]);
        for (int b = 0; b < B; ++b) coeff_grad[ch * B + b] = pre * tr.basis[b];
      }
      model.color(k).scatter_gradient(st, std::span<const double>(coeff_grad, 3 * B));
    }
  }
}

LossBreakdown compute_gradients(SceneModel& model, const RayBatch& rays,
                                std::span<const QuadratureSamples> samples,
                                std::span<const RayTarget> targets, const LossConfig& config) {
  std::vector<RayTrace> traces;
  trace_batch(model, rays, samples, traces);
  std::vector<RayGradient> grads;
  const auto loss = batch_loss(traces, targets, config, &grads);
  model.zero_gradients();
  for (std::size_t r = 0; r < traces.size(); ++r) accumulate_gradients(model, traces[r], grads[r]);
  return loss;
}

TrainResult train(SceneModel& model, const TrainingRays& data, const TrainConfig& config,
                  const TrainCallback& on_iteration) {
  config.validate();
  require(data.size() > 0, "training needs at least one supervised ray");
  TrainResult result;
  if (config.iterations == 0) return result;
  result.trace.reserve(config.iterations);

  model.zero_gradients();
  LazyAdam adam(model, config.adam);
  TouchedCells touched(model.geometry().shape().cell_count());
  Rng rng(config.seed);

  const int R = config.batch_size;
  const int P = config.samples;
  RayBatch batch;
  std::vector<RayTarget> targets(R);
  std::vector<QuadratureSamples> samples(R);
  std::vector<RayTrace> traces;
  std::vector<RayGradient> grads;
  std::vector<double> jitter(P);
  LossConfig loss_config = config.loss;

  for (int it = 0; it < config.iterations; ++it) {
    batch = RayBatch{};
    for (int r = 0; r < R; ++r) {
      const std::size_t idx = rng.index(data.size());
      batch.origins.push_back(data.rays.origins[idx]);
      batch.directions.push_back(data.rays.directions[idx]);
      batch.t_near.push_back(data.rays.t_near[idx]);
      batch.t_far.push_back(data.rays.t_far[idx]);
      batch.valid.push_back(data.rays.valid[idx]);
      batch.pixels.push_back(data.rays.pixels[idx]);
      targets[r] = data.targets[idx];
      if (config.stratified)
        for (auto& j : jitter) j = rng.uniform();
      if (batch.valid.back())
        samples[r] = sample_points(batch.t_near[r], batch.t_far[r], P,
                                   config.stratified ? jitter.data() : nullptr);
    }
    loss_config.weights.lambda_init = config.lambda_init_at(it);

    trace_batch(model, batch, samples, traces);
    const LossBreakdown loss = batch_loss(traces, targets, loss_config, &grads);
    if (!std::isfinite(loss.total)) {
      std::ostringstream msg;
      msg << "non-finite loss at iteration " << it << ": photo_pos=" << loss.photo_pos
          << " photo_neg=" << loss.photo_neg << " prop=" << loss.prop << " init=" << loss.init;
      fail(ErrorCode::kNumeric, msg.str());
    }
    for (std::size_t r = 0; r < traces.size(); ++r)
      accumulate_gradients(model, traces[r], grads[r], &touched);
    adam.step(touched, config.learning_rate_at(it));
    touched.clear();

    LossRecord record{it, loss};
    result.trace.push_back(record);
    if (on_iteration) on_iteration(record);
  }
  return result;
}

void write_loss_csv(const std::string& path, const std::vector<LossRecord>& trace) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open for writing: " + path);
  out << "iteration,L_photo_pos,L_photo_neg,L_prop,L_init,total\n";
  out.precision(9);
  for (const auto& r : trace)
    out << r.iteration << ',' << r.loss.photo_pos << ',' << r.loss.photo_neg << ','
        << r.loss.prop << ',' << r.loss.init << ',' << r.loss.total << '\n';
}

}  // namespace rfp
