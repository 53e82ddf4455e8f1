#include "pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

namespace rfp {

using nlohmann::json;

void RunConfig::validate() const {
  model.validate();
  train.validate();
  require(init.num_objects >= 1, "init num_objects must be >= 1");
  require(init.kmeans.max_iterations >= 1 && init.kmeans.tolerance >= 0.0 &&
              init.kmeans.restarts >= 1, "invalid k-means options");
  require(init.features.blur_sigma > 0.0 && init.features.std_window >= 1, "invalid feature options");
  require(em.iterations >= 0, "EM iterations must be >= 0");
  require(std::isfinite(em.weight) && em.weight >= 0.0, "EM weight must be finite and >= 0");
  require(std::isfinite(em.feature_scale) && em.feature_scale > 0.0, "EM feature scale must be > 0");
  require(render.samples >= 2, "render samples must be >= 2");
}

RunConfig RunConfig::resolved() const {
  RunConfig r = *this;
  r.train.seed = seed;
  r.init.seed = seed;
  r.render.seed = seed;
  r.init.num_objects = r.model.num_objects;
  if (no_prop) {
    r.train.loss.weights.lambda_prop = 0.0;
    r.train.loss.photo.negative_term = false;
  }
  if (no_init_loss) {
    r.train.loss.weights.lambda_init = 0.0;
    r.train.lambda_init_floor = 0.0;
  }
  return r;
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json run_config_to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["model"] = model_config_to_json(c.model);
  const auto& t = c.train;
  j["train"] = {{"iterations", t.iterations},
                {"batch_size", t.batch_size},
                {"samples", t.samples},
                {"stratified", t.stratified},
                {"learning_rate", t.learning_rate},
                {"lr_decay", t.lr_decay},
                {"adam_beta1", t.adam.beta1},
                {"adam_beta2", t.adam.beta2},
                {"adam_epsilon", t.adam.epsilon},
                {"lambda_prop", t.loss.weights.lambda_prop},
                {"lambda_init", t.loss.weights.lambda_init},
                {"lambda_init_floor", t.lambda_init_floor},
                {"init_anneal_fraction", t.init_anneal_fraction},
                {"photo_clamp", std::isfinite(t.loss.photo.clamp) ? json(t.loss.photo.clamp) : json(nullptr)},
                {"negative_term", t.loss.photo.negative_term},
                {"negative_updates_density", t.loss.photo.negative_updates_density},
                {"negative_updates_semantics", t.loss.photo.negative_updates_semantics},
                {"negative_updates_colors", t.loss.photo.negative_updates_colors},
                {"prop_min_weight", t.loss.prop_min_weight}};
  j["init_seg"] = {{"blur_sigma", c.init.features.blur_sigma},
                   {"std_window", c.init.features.std_window},
                   {"spatial_weight", c.init.features.spatial_weight},
                   {"kmeans_iterations", c.init.kmeans.max_iterations},
                   {"kmeans_tolerance", c.init.kmeans.tolerance},
                   {"kmeans_restarts", c.init.kmeans.restarts},
                   {"feature_dir", c.feature_dir}};
  j["em"] = {{"enabled", c.use_em},
             {"iterations", c.em.iterations},
             {"weight", c.em.weight},
             {"feature_scale", c.em.feature_scale},
             {"mixing", c.em.mixing == EmMixing::kLogit ? "logit" : "probability"}};
  j["render"] = {{"samples", c.render.samples}, {"stratified", c.render.stratified}};
  j["ablation"] = {{"no_prop", c.no_prop}, {"no_init_loss", c.no_init_loss}};
  return j;
}

RunConfig run_config_from_json(const json& j, const RunConfig& defaults) {
  RunConfig c = defaults;
  try {
    take(j, "seed", c.seed);
    if (j.contains("model")) c.model = model_config_from_json(j["model"], c.model);
    if (j.contains("train")) {
      const json& t = j["train"];
      auto& tc = c.train;
      take(t, "iterations", tc.iterations);
      take(t, "batch_size", tc.batch_size);
      take(t, "samples", tc.samples);
      take(t, "stratified", tc.stratified);
      take(t, "learning_rate", tc.learning_rate);
      take(t, "lr_decay", tc.lr_decay);
      take(t, "adam_beta1", tc.adam.beta1);
      take(t, "adam_beta2", tc.adam.beta2);
      take(t, "adam_epsilon", tc.adam.epsilon);
      take(t, "lambda_prop", tc.loss.weights.lambda_prop);
      take(t, "lambda_init", tc.loss.weights.lambda_init);
      take(t, "lambda_init_floor", tc.lambda_init_floor);
      take(t, "init_anneal_fraction", tc.init_anneal_fraction);
      if (t.contains("photo_clamp"))
        tc.loss.photo.clamp = t["photo_clamp"].is_null() ? std::numeric_limits<double>::infinity()
                                                         : t["photo_clamp"].get<double>();
      take(t, "negative_term", tc.loss.photo.negative_term);
      take(t, "negative_updates_density", tc.loss.photo.negative_updates_density);
      take(t, "negative_updates_semantics", tc.loss.photo.negative_updates_semantics);
      take(t, "negative_updates_colors", tc.loss.photo.negative_updates_colors);
      take(t, "prop_min_weight", tc.loss.prop_min_weight);
    }
    if (j.contains("init_seg")) {
      const json& s = j["init_seg"];
      take(s, "blur_sigma", c.init.features.blur_sigma);
      take(s, "std_window", c.init.features.std_window);
      take(s, "spatial_weight", c.init.features.spatial_weight);
      take(s, "kmeans_iterations", c.init.kmeans.max_iterations);
      take(s, "kmeans_tolerance", c.init.kmeans.tolerance);
      take(s, "kmeans_restarts", c.init.kmeans.restarts);
      take(s, "feature_dir", c.feature_dir);
    }
    if (j.contains("em")) {
      const json& e = j["em"];
      take(e, "enabled", c.use_em);
      take(e, "iterations", c.em.iterations);
      take(e, "weight", c.em.weight);
      take(e, "feature_scale", c.em.feature_scale);
      if (e.contains("mixing")) {
        const auto m = e["mixing"].get<std::string>();
        require(m == "probability" || m == "logit", "em.mixing must be \"probability\" or \"logit\"");
        c.em.mixing = m == "logit" ? EmMixing::kLogit : EmMixing::kProbability;
      }
    }
    if (j.contains("render")) {
      take(j["render"], "samples", c.render.samples);
      take(j["render"], "stratified", c.render.stratified);
    }
    if (j.contains("ablation")) {
      take(j["ablation"], "no_prop", c.no_prop);
      take(j["ablation"], "no_init_loss", c.no_init_loss);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("run config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path, const RunConfig& defaults) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kFormat, path + ": malformed JSON: " + e.what());
  }
  return run_config_from_json(j, defaults);
}

ModelConfig model_config_for(const RunConfig& config, const SceneDataset& dataset) {
  ModelConfig m = config.model;
  if (dataset.bounds) m.bounds = *dataset.bounds;
  return m;
}

TrainingRays build_training_rays(const SceneDataset& ds, const std::vector<LabelMap>& labels, const Aabb& bounds) {
  require(labels.empty() || labels.size() == ds.train.size(), "one init label map per training view required");
  TrainingRays out;
  for (std::size_t v = 0; v < ds.train.size(); ++v) {
    const View& view = ds.train[v];
    const RayBatch rays = generate_all_rays(view.camera, bounds);
    for (std::size_t r = 0; r < rays.size(); ++r) {
      if (!rays.valid[r]) continue;
      out.rays.push(rays.origins[r], rays.directions[r], bounds, rays.pixels[r]);
      RayTarget t;
      t.color = view.image.rgb(r);
      if (!labels.empty()) {
        require(labels[v].width == view.image.width && labels[v].height == view.image.height,
                "init labels for " + view.name + " do not match the image resolution");
        const int l = labels[v].labels[r];
        t.init_label = l == kUnlabeled ? -1 : l;
      }
      out.targets.push_back(t);
    }
  }
  return out;
}

namespace {

FeatureMap features_for(const RunConfig& config, const std::string& name, const Image& image) {
  if (config.feature_dir.empty()) return extract_features(image, config.init.features);
  const auto path = std::filesystem::path(config.feature_dir) / (name + ".rfpfeat");
  return read_feature_map(path.string(), image.width, image.height);
}

}  // namespace

InitSegResult run_init_seg(const SceneDataset& ds, const RunConfig& config, Warnings* warnings) {
  std::vector<Image> images;
  for (const auto& v : ds.train) images.push_back(v.image);
  if (config.feature_dir.empty()) return bootstrap_segmentation(images, config.init, warnings);
  InitSegResult r;
  for (const auto& v : ds.train) r.features.push_back(features_for(config, v.name, v.image));
  const auto fg = split_fg_bg(r.features, config.init.seed, config.init.kmeans, warnings);
  r.labels = partition_foreground(r.features, fg, config.init.num_objects, config.init.seed + 1,
                                  config.init.kmeans, warnings);
  return r;
}

std::vector<ViewSegmentation> segment_views(const SceneModel& model, const SceneDataset& ds,
                                            const RunConfig& config, bool use_em, Warnings* warnings) {
  std::vector<ViewSegmentation> out;
  const int L = model.num_labels();
  for (int split = 0; split < 2; ++split) {
    for (const auto& view : split ? ds.test : ds.train) {
      ViewSegmentation s;
      s.name = view.name;
      s.test = split == 1;
      s.render = render_frame(model, view.camera, config.render);
      s.labels = s.render.label_map;
      if (use_em && L > 1) {
        const FeatureMap f = s.test && config.feature_dir.empty()
                                 ? extract_features(s.render.rgb, config.init.features)
                                 : features_for(config, view.name, view.image);
        const Eigen::Map<const EmMatrix> logits(s.render.logits.data(), static_cast<Eigen::Index>(f.pixel_count()), L);
        s.labels = refine(s.render.label_map, logits, f, config.em, warnings).labels;
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

namespace {

std::optional<SegMetrics> split_metrics(const std::vector<View>& views, const std::vector<LabelMap>& pred) {
  std::vector<LabelMap> gt, p;
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (!views[i].mask) continue;
    gt.push_back(*views[i].mask);
    p.push_back(pred.at(i));
  }
  if (gt.empty()) return std::nullopt;
  return seg_metrics(p, gt);
}

}  // namespace

EvalMetrics evaluate_files(const SceneDataset& ds, const std::vector<LabelMap>& train_pred,
                           const std::vector<LabelMap>& test_pred, const std::vector<Image>& test_renders) {
  EvalMetrics m;
  if (!train_pred.empty()) {
    require(train_pred.size() == ds.train.size(), "one predicted mask per training view required");
    m.train = split_metrics(ds.train, train_pred);
  }
  if (!test_pred.empty()) {
    require(test_pred.size() == ds.test.size(), "one predicted mask per test view required");
    m.test = split_metrics(ds.test, test_pred);
  }
  if (!test_renders.empty()) {
    require(test_renders.size() == ds.test.size(), "one render per test view required");
    double p = 0.0, s = 0.0;
    for (std::size_t i = 0; i < ds.test.size(); ++i) {
      p += psnr(test_renders[i], ds.test[i].image);
      s += ssim(test_renders[i], ds.test[i].image);
    }
    m.psnr = p / ds.test.size();
    m.ssim = s / ds.test.size();
    m.has_images = true;
  }
  return m;
}

EvalMetrics evaluate(const SceneDataset& ds, const std::vector<ViewSegmentation>& views) {
  std::vector<LabelMap> train_pred, test_pred;
  std::vector<Image> renders;
  for (const auto& v : views) {
    (v.test ? test_pred : train_pred).push_back(v.labels);
    if (v.test) renders.push_back(v.render.rgb);
  }
  return evaluate_files(ds, train_pred, test_pred, renders);
}

json metrics_to_json(const EvalMetrics& m) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json("inf"); };
  json j = json::object();
  j["acc"] = m.train ? json(m.train->acc) : json(nullptr);
  j["miou"] = m.train ? json(m.train->miou) : json(nullptr);
  j["n_acc"] = m.test ? json(m.test->acc) : json(nullptr);
  j["n_miou"] = m.test ? json(m.test->miou) : json(nullptr);
  j["psnr"] = m.has_images ? num(m.psnr) : json(nullptr);
  j["ssim"] = m.has_images ? json(m.ssim) : json(nullptr);
  const auto* per_class = m.test ? &*m.test : (m.train ? &*m.train : nullptr);
  j["per_class_iou"] = per_class ? json(per_class->per_class_iou) : json::array();
  return j;
}

}  // namespace rfp
