#include "rfp/rfp.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "editor.hpp"
#include "pipeline.hpp"
#include "scene_gen.hpp"

struct rfp_dataset {
  rfp::SceneDataset data;
};

struct rfp_model {
  rfp::SceneModel model;
};

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

thread_local std::string g_last_error;

rfp_status to_status(rfp::ErrorCode code) { return static_cast<rfp_status>(code); }

template <typename F>
rfp_status guarded(F&& fn) {
  try {
    fn();
    g_last_error.clear();
    return RFP_OK;
  } catch (const rfp::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const json::exception& e) {
    g_last_error = std::string("json: ") + e.what();
    return RFP_FORMAT;
  } catch (const fs::filesystem_error& e) {
    g_last_error = e.what();
    return RFP_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return RFP_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RFP_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  rfp::require(p != nullptr, std::string(what) + " must not be NULL");
}

json parse_json(const char* text, const char* what) {
  if (!text || !*text) return json::object();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    rfp::fail(rfp::ErrorCode::kFormat, std::string(what) + ": malformed JSON: " + e.what());
  }
}

rfp::RunConfig run_config(const char* config_json) {
  return rfp::run_config_from_json(parse_json(config_json, "config")).resolved();
}

std::vector<rfp::LabelMap> read_view_labels(const std::vector<rfp::View>& views, const fs::path& dir) {
  std::vector<rfp::LabelMap> out;
  for (const auto& v : views) {
    const fs::path p = dir / (v.name + ".png");
    if (!fs::exists(p)) rfp::fail(rfp::ErrorCode::kIo, "label map not found: " + p.string());
    out.push_back(rfp::read_label_png(p.string()));
  }
  return out;
}

char* dup_string(const std::string& text) {
  char* buf = static_cast<char*>(std::malloc(text.size() + 1));
  if (!buf) throw std::bad_alloc();
  std::memcpy(buf, text.c_str(), text.size() + 1);
  return buf;
}

}  // namespace

extern "C" {

const char* rfp_last_error(void) { return g_last_error.c_str(); }

const char* rfp_version(void) { return "0.1.0"; }

rfp_status rfp_set_threads(int n) {
  return guarded([&] { rfp::set_thread_count(n); });
}

void rfp_free_string(char* s) { std::free(s); }

rfp_status rfp_resolve_run_config(const char* config_json, char** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    const auto config = rfp::run_config_from_json(parse_json(config_json, "config"));
    *out = dup_string(rfp::run_config_to_json(config).dump(2));
  });
}

rfp_status rfp_resolve_scene_spec(const char* spec_json, char** out) {
  return guarded([&] {
    need(spec_json, "spec_json");
    need(out, "out");
    *out = nullptr;
    const auto spec = rfp::scene_spec_from_json(parse_json(spec_json, "scene spec"));
    *out = dup_string(rfp::scene_spec_to_json(spec).dump(2));
  });
}

rfp_status rfp_dataset_generate(const char* spec_json, rfp_dataset** out) {
  return guarded([&] {
    need(spec_json, "spec_json");
    need(out, "out");
    *out = nullptr;
    auto ds = std::make_unique<rfp_dataset>();
    ds->data = rfp::generate_scene(rfp::scene_spec_from_json(parse_json(spec_json, "scene spec")));
    *out = ds.release();
  });
}

rfp_status rfp_dataset_load(const char* dir, rfp_dataset** out) {
  return guarded([&] {
    need(dir, "dir");
    need(out, "out");
    *out = nullptr;
    auto ds = std::make_unique<rfp_dataset>();
    ds->data = rfp::load_dataset(dir);
    *out = ds.release();
  });
}

rfp_status rfp_dataset_save(const rfp_dataset* ds, const char* dir) {
  return guarded([&] {
    need(ds, "dataset");
    need(dir, "dir");
    rfp::save_dataset(ds->data, dir);
  });
}

rfp_status rfp_dataset_view_count(const rfp_dataset* ds, int* train, int* test) {
  return guarded([&] {
    need(ds, "dataset");
    if (train) *train = static_cast<int>(ds->data.train.size());
    if (test) *test = static_cast<int>(ds->data.test.size());
  });
}

void rfp_dataset_free(rfp_dataset* ds) { delete ds; }

rfp_status rfp_init_seg(const rfp_dataset* ds, const char* config_json, const char* out_dir) {
  return guarded([&] {
    need(ds, "dataset");
    need(out_dir, "out_dir");
    const auto config = run_config(config_json);
    const auto result = rfp::run_init_seg(ds->data, config);
    const fs::path root(out_dir);
    fs::create_directories(root / "labels");
    fs::create_directories(root / "features");
    for (std::size_t v = 0; v < ds->data.train.size(); ++v) {
      const auto& name = ds->data.train[v].name;
      rfp::write_label_png((root / "labels" / (name + ".png")).string(), result.labels[v]);
      rfp::write_feature_map((root / "features" / (name + ".rfpfeat")).string(), result.features[v]);
    }
  });
}

rfp_status rfp_model_create(const char* config_json, const rfp_dataset* ds, rfp_model** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    const auto config = run_config(config_json);
    auto m = std::make_unique<rfp_model>();
    const rfp::ModelConfig mc = ds ? rfp::model_config_for(config, ds->data) : config.model;
    m->model = rfp::SceneModel(mc, config.seed);
    *out = m.release();
  });
}

rfp_status rfp_model_load(const char* path, rfp_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    auto m = std::make_unique<rfp_model>();
    m->model = rfp::load_checkpoint(path);
    *out = m.release();
  });
}

rfp_status rfp_model_save(const rfp_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    rfp::save_checkpoint(model->model, path);
  });
}

rfp_status rfp_model_num_objects(const rfp_model* model, int* k) {
  return guarded([&] {
    need(model, "model");
    need(k, "k");
    *k = model->model.num_objects();
  });
}

void rfp_model_free(rfp_model* model) { delete model; }

rfp_status rfp_train(rfp_model* model, const rfp_dataset* ds, const char* labels_dir, const char* config_json,
                     const char* loss_csv) {
  return guarded([&] {
    need(model, "model");
    need(ds, "dataset");
    const auto config = run_config(config_json);
    std::vector<rfp::LabelMap> labels;
    if (labels_dir) labels = read_view_labels(ds->data.train, labels_dir);
    rfp::require(labels_dir || config.train.loss.weights.lambda_init == 0.0,
                 "training with the init loss needs a labels directory");
    for (const auto& l : labels)
      rfp::require(l.max_label() <= model->model.num_objects(), "init labels exceed the model's object count");
    const auto rays = rfp::build_training_rays(ds->data, labels, model->model.bounds());
    const auto result = rfp::train(model->model, rays, config.train);
    if (loss_csv) rfp::write_loss_csv(loss_csv, result.trace);
  });
}

rfp_status rfp_segment(const rfp_model* model, const rfp_dataset* ds, const char* config_json,
                       const char* out_dir) {
  return guarded([&] {
    need(model, "model");
    need(ds, "dataset");
    need(out_dir, "out_dir");
    const auto config = run_config(config_json);
    const auto views = rfp::segment_views(model->model, ds->data, config, config.use_em);
    const fs::path root(out_dir);
    fs::create_directories(root / "masks");
    fs::create_directories(root / "images");
    for (const auto& v : views) {
      rfp::write_label_png((root / "masks" / (v.name + ".png")).string(), v.labels);
      rfp::write_png((root / "images" / (v.name + ".png")).string(), v.render.rgb);
    }
  });
}

rfp_status rfp_render(const rfp_model* model, const rfp_dataset* ds, const char* config_json,
                      const char* out_dir) {
  return guarded([&] {
    need(model, "model");
    need(ds, "dataset");
    need(out_dir, "out_dir");
    const auto config = run_config(config_json);
    const fs::path root(out_dir);
    fs::create_directories(root / "images");
    fs::create_directories(root / "depth");
    for (const auto* v : ds->data.all_views()) {
      const auto f = rfp::render_frame(model->model, v->camera, config.render);
      rfp::write_png((root / "images" / (v->name + ".png")).string(), f.rgb);
      rfp::Image depth(f.rgb.width, f.rgb.height, 1);
      depth.data = f.depth;
      rfp::write_float_image((root / "depth" / (v->name + ".rfpimg")).string(), depth);
    }
  });
}

rfp_status rfp_edit(const rfp_model* model, const rfp_dataset* ds, const char* edit_json, const char* config_json,
                    const char* out_dir) {
  return guarded([&] {
    need(model, "model");
    need(ds, "dataset");
    need(edit_json, "edit_json");
    need(out_dir, "out_dir");
    const auto config = run_config(config_json);
    const auto script = rfp::edit_script_from_json(parse_json(edit_json, "edit script"));
    const rfp::EditedScene scene(model->model, script);
    const fs::path root(out_dir);
    for (const char* sub : {"images", "masks", "alpha"}) fs::create_directories(root / sub);
    for (const auto* v : ds->data.all_views()) {
      const auto f = rfp::render_edited(scene, v->camera, config.render);
      rfp::write_png((root / "images" / (v->name + ".png")).string(), f.rgb);
      rfp::write_label_png((root / "masks" / (v->name + ".png")).string(), f.label_map);
      rfp::Image alpha(f.rgb.width, f.rgb.height, 1);
      alpha.data = f.alpha;
      rfp::write_png((root / "alpha" / (v->name + ".png")).string(), alpha);
    }
  });
}

rfp_status rfp_evaluate(const rfp_dataset* ds, const char* masks_dir, const char* renders_dir,
                        char** metrics_json) {
  return guarded([&] {
    need(ds, "dataset");
    need(masks_dir, "masks_dir");
    need(metrics_json, "metrics_json");
    *metrics_json = nullptr;
    const auto train = read_view_labels(ds->data.train, masks_dir);
    const auto test = read_view_labels(ds->data.test, masks_dir);
    std::vector<rfp::Image> renders;
    if (renders_dir) {
      for (const auto& v : ds->data.test) {
        const fs::path p = fs::path(renders_dir) / (v.name + ".png");
        if (!fs::exists(p)) rfp::fail(rfp::ErrorCode::kIo, "render not found: " + p.string());
        renders.push_back(rfp::read_png(p.string()));
      }
    }
    const auto metrics = rfp::evaluate_files(ds->data, train, test, renders);
    *metrics_json = dup_string(rfp::metrics_to_json(metrics).dump(2));
  });
}

}  // extern "C"
