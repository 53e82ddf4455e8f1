#include "binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "common.hpp"

namespace rfp {

static_assert(std::endian::native == std::endian::little, "payload is written in host order");

void write_tagged_binary(const std::string& path, const std::string& magic,
                         const nlohmann::json& header, std::span<const float> payload) {
  require(magic.size() == 8, "magic must be 8 bytes");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open for writing: " + path);
  const std::string text = header.dump();
  out.write(magic.data(), 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.put('\n');
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!out) fail(ErrorCode::kIo, "write failed: " + path);
}

TaggedBinary read_tagged_binary(const std::string& path, const std::string& magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open: " + path);
  char got[8];
  in.read(got, 8);
  if (!in || std::memcmp(got, magic.data(), 8) != 0)
    fail(ErrorCode::kFormat, path + ": bad magic, expected " + magic);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kFormat, path + ": missing header");
  TaggedBinary out;
  try {
    out.header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, path + ": malformed header: " + e.what());
  }
  const auto start = in.tellg();
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg() - start);
  if (bytes % sizeof(float) != 0) fail(ErrorCode::kFormat, path + ": truncated payload");
  in.seekg(start);
  out.payload.resize(bytes / sizeof(float));
  in.read(reinterpret_cast<char*>(out.payload.data()), static_cast<std::streamsize>(bytes));
  if (!in) fail(ErrorCode::kIo, "read failed: " + path);
  return out;
}

}  // namespace rfp
