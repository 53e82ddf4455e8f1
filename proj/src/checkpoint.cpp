#include "checkpoint.hpp"

#include "binary_io.hpp"

namespace rfp {

using nlohmann::json;

json model_config_to_json(const ModelConfig& c) {
  return json{
      {"num_objects", c.num_objects},
      {"resolution", {c.resolution.nx, c.resolution.ny, c.resolution.nz}},
      {"bounds", {{"min", {c.bounds.min.x(), c.bounds.min.y(), c.bounds.min.z()}},
                  {"max", {c.bounds.max.x(), c.bounds.max.y(), c.bounds.max.z()}}}},
      {"sh_degree", c.sh_degree},
      {"density_init", c.density_init},
      {"semantic_init_range", c.semantic_init_range},
      {"color_init", c.color_init},
  };
}

namespace {
Vec3 vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) fail(ErrorCode::kFormat, "expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}
}  // namespace

ModelConfig model_config_from_json(const json& j, const ModelConfig& defaults) {
  ModelConfig c = defaults;
  try {
    if (j.contains("num_objects")) c.num_objects = j.at("num_objects").get<int>();
    if (j.contains("resolution")) {
      const auto& r = j.at("resolution");
      if (r.is_number()) {
        const int n = r.get<int>();
        c.resolution = {n, n, n};
      } else {
        c.resolution = {r.at(0).get<int>(), r.at(1).get<int>(), r.at(2).get<int>()};
      }
    }
    if (j.contains("bounds")) {
      c.bounds.min = vec3_from(j.at("bounds").at("min"));
      c.bounds.max = vec3_from(j.at("bounds").at("max"));
    }
    if (j.contains("sh_degree")) c.sh_degree = j.at("sh_degree").get<int>();
    if (j.contains("density_init")) c.density_init = j.at("density_init").get<double>();
    if (j.contains("semantic_init_range"))
      c.semantic_init_range = j.at("semantic_init_range").get<double>();
    if (j.contains("color_init")) c.color_init = j.at("color_init").get<double>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("invalid model config: ") + e.what());
  }
  return c;
}

void save_checkpoint(const SceneModel& model, const std::string& path) {
  json header = model_config_to_json(model.config());
  header["arrays"] = json::array();
  std::vector<float> payload;
  const char* names[] = {"density", "semantics"};
  int index = 0;
  for (const auto* field : model.fields()) {
    const std::string name =
        index < 2 ? names[index] : "color_" + std::to_string(index - 2);
    header["arrays"].push_back({{"name", name},
                                {"channels", field->channels()},
                                {"count", field->values().size()}});
    for (double v : field->values()) payload.push_back(static_cast<float>(v));
    ++index;
  }
  write_tagged_binary(path, kCheckpointMagic, header, payload);
}

SceneModel load_checkpoint(const std::string& path) {
  auto blob = read_tagged_binary(path, kCheckpointMagic);
  const ModelConfig config = model_config_from_json(blob.header);
  SceneModel model(config, 0);
  auto fields = model.fields();
  const auto& arrays = blob.header.at("arrays");
  if (arrays.size() != fields.size())
    fail(ErrorCode::kFormat, path + ": array count does not match the model layout");
  std::size_t offset = 0;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    auto values = fields[i]->values();
    const auto count = arrays[i].at("count").get<std::size_t>();
    if (count != values.size() || arrays[i].at("channels").get<int>() != fields[i]->channels())
      fail(ErrorCode::kFormat, path + ": array '" + arrays[i].at("name").get<std::string>() +
                                   "' has unexpected shape");
    if (offset + count > blob.payload.size()) fail(ErrorCode::kFormat, path + ": truncated");
    for (std::size_t k = 0; k < count; ++k) values[k] = blob.payload[offset + k];
    offset += count;
  }
  if (offset != blob.payload.size()) fail(ErrorCode::kFormat, path + ": trailing data");
  return model;
}

}  // namespace rfp
