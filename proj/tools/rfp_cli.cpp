// rfp: command-line driver over the C API.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rfp/rfp.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* status_name(rfp_status s) {
  switch (s) {
    case RFP_OK: return "OK";
    case RFP_INVALID_ARGUMENT: return "INVALID_ARGUMENT";
    case RFP_IO: return "IO";
    case RFP_FORMAT: return "FORMAT";
    case RFP_NUMERIC: return "NUMERIC";
    case RFP_INTERNAL: return "INTERNAL";
  }
  return "UNKNOWN";
}

struct Failure {
  rfp_status status;
  std::string message;
};

void check(rfp_status s) {
  if (s != RFP_OK) throw Failure{s, rfp_last_error()};
}

[[noreturn]] void usage_error(const std::string& message) { throw Failure{RFP_INVALID_ARGUMENT, message}; }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{RFP_IO, "cannot open " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Failure{RFP_IO, "cannot write " + path.string()};
  out << text << '\n';
}

std::string take_string(char* s) {
  std::string out = s ? s : "";
  rfp_free_string(s);
  return out;
}

json parse_config(const std::string& path) {
  if (path.empty()) return json::object();
  try {
    return json::parse(slurp(path));
  } catch (const json::parse_error& e) {
    throw Failure{RFP_FORMAT, path + ": malformed JSON: " + e.what()};
  }
}

struct Options {
  std::string config, out, dataset, labels, checkpoint, edit_script, masks, renders;
  long long seed = -1;
  int threads = 0;
  bool no_prop = false, no_init_loss = false, no_em = false;
};

// Config file plus flag overrides, completed with defaults by the library.
std::string resolved_run_config(const Options& o) {
  json j = parse_config(o.config);
  if (o.seed >= 0) j["seed"] = o.seed;
  if (o.no_prop) j["ablation"]["no_prop"] = true;
  if (o.no_init_loss) j["ablation"]["no_init_loss"] = true;
  if (o.no_em) j["em"]["enabled"] = false;
  char* out = nullptr;
  check(rfp_resolve_run_config(j.dump().c_str(), &out));
  return take_string(out);
}

struct Dataset {
  rfp_dataset* p = nullptr;
  ~Dataset() { rfp_dataset_free(p); }
};
struct Model {
  rfp_model* p = nullptr;
  ~Model() { rfp_model_free(p); }
};

void need(const std::string& value, const char* flag) {
  if (value.empty()) usage_error(std::string("missing required flag ") + flag);
}

fs::path prepare_out(const Options& o) {
  need(o.out, "--out");
  fs::create_directories(o.out);
  return fs::path(o.out);
}

void load_dataset(const Options& o, Dataset& ds) {
  need(o.dataset, "--dataset");
  check(rfp_dataset_load(o.dataset.c_str(), &ds.p));
}

void load_model(const Options& o, Model& m) {
  need(o.checkpoint, "--checkpoint");
  check(rfp_model_load(o.checkpoint.c_str(), &m.p));
}

void cmd_gen_scene(const Options& o) {
  need(o.config, "--config");
  json spec = parse_config(o.config);
  if (o.seed >= 0) spec["seed"] = o.seed;
  char* resolved = nullptr;
  check(rfp_resolve_scene_spec(spec.dump().c_str(), &resolved));
  const std::string text = take_string(resolved);
  const fs::path out = prepare_out(o);
  Dataset ds;
  check(rfp_dataset_generate(text.c_str(), &ds.p));
  check(rfp_dataset_save(ds.p, out.string().c_str()));
  write_text(out / "config.resolved.json", text);
}

void cmd_init_seg(const Options& o) {
  const std::string config = resolved_run_config(o);
  const fs::path out = prepare_out(o);
  Dataset ds;
  load_dataset(o, ds);
  check(rfp_init_seg(ds.p, config.c_str(), out.string().c_str()));
  write_text(out / "config.resolved.json", config);
}

void cmd_train(const Options& o) {
  const std::string config = resolved_run_config(o);
  const fs::path out = prepare_out(o);
  Dataset ds;
  load_dataset(o, ds);
  Model m;
  check(rfp_model_create(config.c_str(), ds.p, &m.p));
  const std::string csv = (out / "loss.csv").string();
  check(rfp_train(m.p, ds.p, o.labels.empty() ? nullptr : o.labels.c_str(), config.c_str(), csv.c_str()));
  check(rfp_model_save(m.p, (out / "model.rfpckpt").string().c_str()));
  write_text(out / "config.resolved.json", config);
}

void cmd_segment(const Options& o) {
  const std::string config = resolved_run_config(o);
  const fs::path out = prepare_out(o);
  Dataset ds;
  load_dataset(o, ds);
  Model m;
  load_model(o, m);
  check(rfp_segment(m.p, ds.p, config.c_str(), out.string().c_str()));
  write_text(out / "config.resolved.json", config);
}

void cmd_render(const Options& o) {
  const std::string config = resolved_run_config(o);
  const fs::path out = prepare_out(o);
  Dataset ds;
  load_dataset(o, ds);
  Model m;
  load_model(o, m);
  check(rfp_render(m.p, ds.p, config.c_str(), out.string().c_str()));
  write_text(out / "config.resolved.json", config);
}

void cmd_edit(const Options& o) {
  need(o.edit_script, "--edit-script");
  const std::string config = resolved_run_config(o);
  const std::string script = slurp(o.edit_script);
  const fs::path out = prepare_out(o);
  Dataset ds;
  load_dataset(o, ds);
  Model m;
  load_model(o, m);
  check(rfp_edit(m.p, ds.p, script.c_str(), config.c_str(), out.string().c_str()));
  json record = json::parse(config);
  record["edit_script"] = json::parse(script);
  write_text(out / "config.resolved.json", record.dump(2));
}

void cmd_eval(const Options& o) {
  need(o.masks, "--masks");
  const fs::path out = prepare_out(o);
  Dataset ds;
  load_dataset(o, ds);
  char* metrics = nullptr;
  check(rfp_evaluate(ds.p, o.masks.c_str(), o.renders.empty() ? nullptr : o.renders.c_str(), &metrics));
  const std::string text = take_string(metrics);
  write_text(out / "metrics.json", text);
  const json record = {{"dataset", o.dataset}, {"masks", o.masks}, {"renders", o.renders}};
  write_text(out / "config.resolved.json", record.dump(2));
  std::cout << text << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised 3D object segmentation with layered voxel radiance fields"};
  app.require_subcommand(1, 1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON config file");
    sub->add_option("--seed", o.seed, "seed override");
    sub->add_option("--threads", o.threads, "worker thread cap (0 = all cores)");
    sub->add_option("--out", o.out, "output directory");
  };
  auto run_flags = [&](CLI::App* sub) {
    sub->add_option("--dataset", o.dataset, "dataset directory");
    sub->add_flag("--no-prop", o.no_prop, "disable propagation and the subtracted photometric term");
    sub->add_flag("--no-init-loss", o.no_init_loss, "disable the initial-label cross-entropy");
    sub->add_flag("--no-em", o.no_em, "skip EM mask refinement");
  };

  struct Command {
    const char* name;
    const char* help;
    void (*run)(const Options&);
  };
  const Command commands[] = {
      {"gen-scene", "generate a procedural dataset from a scene spec (--config)", cmd_gen_scene},
      {"init-seg", "bootstrap label maps and features for the training views", cmd_init_seg},
      {"train", "train a model; writes model.rfpckpt and loss.csv", cmd_train},
      {"segment", "render per-view masks (EM-refined unless --no-em)", cmd_segment},
      {"render", "render images and depth for every view", cmd_render},
      {"edit", "apply an edit script and render every view", cmd_edit},
      {"eval", "score masks (and test renders) against ground truth", cmd_eval},
  };
  const Command* chosen = nullptr;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    common(sub);
    if (std::string(c.name) != "gen-scene") run_flags(sub);
    if (std::string(c.name) == "train") sub->add_option("--labels", o.labels, "init label directory");
    if (std::string(c.name) == "segment" || std::string(c.name) == "render" || std::string(c.name) == "edit")
      sub->add_option("--checkpoint", o.checkpoint, "model checkpoint");
    if (std::string(c.name) == "edit") sub->add_option("--edit-script", o.edit_script, "edit script JSON");
    if (std::string(c.name) == "eval") {
      sub->add_option("--masks", o.masks, "directory of predicted <view>.png label maps");
      sub->add_option("--renders", o.renders, "directory of rendered <view>.png images");
    }
    sub->callback([&chosen, &c] { chosen = &c; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error code=INVALID_ARGUMENT message=\"%s\"\n", e.what());
    return RFP_INVALID_ARGUMENT;
  }

  try {
    check(rfp_set_threads(o.threads));
    chosen->run(o);
  } catch (const Failure& f) {
    std::string msg = f.message;
    for (char& ch : msg)
      if (ch == '\n' || ch == '"') ch = '\'';
    std::fprintf(stderr, "error code=%s message=\"%s\"\n", status_name(f.status), msg.c_str());
    return f.status == RFP_OK ? 1 : static_cast<int>(f.status);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error code=INTERNAL message=\"%s\"\n", e.what());
    return RFP_INTERNAL;
  }
  return 0;
}
