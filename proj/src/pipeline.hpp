#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "checkpoint.hpp"
#include "dataset.hpp"
#include "em.hpp"
#include "init_seg.hpp"
#include "metrics.hpp"
#include "train.hpp"

namespace rfp {

// Everything a run needs, validated up front.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  InitSegOptions init;
  EmOptions em;
  RenderOptions render;
  std::uint64_t seed = 0;
  bool use_em = true;
  bool no_prop = false;       // drops the propagation and the subtracted photometric term
  bool no_init_loss = false;  // drops the cross-entropy term
  std::string feature_dir;    // external RFPFEAT1 maps named <view>.rfpfeat; empty = builtin

  void validate() const;
  // Seed fan-out and ablation switches folded into the module configs.
  RunConfig resolved() const;
};

nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j, const RunConfig& defaults = {});
RunConfig load_run_config(const std::string& path, const RunConfig& defaults = {});

// Model config with the dataset's bounds and object count filled in where the
// run config leaves them open.
ModelConfig model_config_for(const RunConfig& config, const SceneDataset& dataset);

// Every training pixel whose ray meets the bounds, with its color and label.
TrainingRays build_training_rays(const SceneDataset& dataset, const std::vector<LabelMap>& init_labels,
                                 const Aabb& bounds);

InitSegResult run_init_seg(const SceneDataset& dataset, const RunConfig& config, Warnings* warnings = nullptr);

struct ViewSegmentation {
  std::string name;
  bool test = false;
  FrameRender render;
  LabelMap labels;  // refined when EM ran, else the rendered argmax
};

// Renders every view, and refines with EM when enabled. Training views use the
// input image for features, test views the rendered image.
std::vector<ViewSegmentation> segment_views(const SceneModel& model, const SceneDataset& dataset,
                                            const RunConfig& config, bool use_em,
                                            Warnings* warnings = nullptr);

struct EvalMetrics {
  std::optional<SegMetrics> train;  // acc / miou
  std::optional<SegMetrics> test;   // n_acc / n_miou
  double psnr = 0.0;
  double ssim = 0.0;
  bool has_images = false;
};

EvalMetrics evaluate(const SceneDataset& dataset, const std::vector<ViewSegmentation>& views);
// Predictions and renders keyed by view name; missing renders skip PSNR/SSIM.
EvalMetrics evaluate_files(const SceneDataset& dataset, const std::vector<LabelMap>& train_pred,
                           const std::vector<LabelMap>& test_pred, const std::vector<Image>& test_renders);
nlohmann::json metrics_to_json(const EvalMetrics& metrics);

}  // namespace rfp
