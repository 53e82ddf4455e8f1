#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "field.hpp"

namespace rfp {

inline constexpr const char* kCheckpointMagic = "RFPCKPT1";

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j, const ModelConfig& defaults = {});

// Arrays are stored as float32 in order: density, semantics, color_0 .. color_K.
void save_checkpoint(const SceneModel& model, const std::string& path);
SceneModel load_checkpoint(const std::string& path);

}  // namespace rfp
