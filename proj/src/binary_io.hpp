#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace rfp {

// Layout: 8 magic bytes, one line of compact UTF-8 JSON terminated by '\n',
// then raw little-endian float32 payload.
struct TaggedBinary {
  nlohmann::json header;
  std::vector<float> payload;
};

void write_tagged_binary(const std::string& path, const std::string& magic,
                         const nlohmann::json& header, std::span<const float> payload);
TaggedBinary read_tagged_binary(const std::string& path, const std::string& magic);

}  // namespace rfp
