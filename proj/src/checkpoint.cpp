#include "askroute/diff/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "askroute/io/binary.hpp"

namespace askroute::diff {

namespace {
constexpr char kMagic[] = "ASKC1";
constexpr std::size_t kMagicLen = 5;
}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  nlohmann::json manifest;
  manifest["tensors"] = nlohmann::json::array();
  for (const auto& [name, t] : checkpoint.tensors.entries()) {
    manifest["tensors"].push_back({{"name", name}, {"shape", t.shape()}});
  }
  manifest["meta"] = checkpoint.meta;
  const std::string body = manifest.dump();

  std::string bytes(kMagic, kMagicLen);
  io::append_u64(bytes, body.size());
  bytes += body;
  for (const auto& e : checkpoint.tensors.entries())
    for (float v : e.second.values()) io::append_f32(bytes, v);
  io::write_file_atomic(path, bytes);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptCheckpoint("checkpoint: cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < kMagicLen + 8 || bytes.compare(0, kMagicLen, kMagic) != 0) {
    throw CorruptCheckpoint("checkpoint: bad magic in " + path.string());
  }
  const std::uint64_t len = io::read_u64(bytes, kMagicLen);
  std::size_t pos = kMagicLen + 8;
  if (len > bytes.size() - pos) throw CorruptCheckpoint("checkpoint: truncated manifest in " + path.string());

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(pos, len));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(std::string("checkpoint: manifest is not JSON: ") + e.what());
  }
  pos += len;

  Checkpoint out;
  try {
    out.meta = manifest.value("meta", nlohmann::json::object());
    for (const auto& entry : manifest.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      const std::size_t count = numel(shape);
      if (count * 4 > bytes.size() - pos) {
        throw CorruptCheckpoint("checkpoint: truncated data for '" + name + "' in " + path.string());
      }
      std::vector<float> values(count);
      for (std::size_t i = 0; i < count; ++i, pos += 4) values[i] = io::read_f32(bytes, pos);
      out.tensors.add(name, Tensor<float>(shape, std::move(values)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(std::string("checkpoint: malformed manifest: ") + e.what());
  }
  if (pos != bytes.size()) throw CorruptCheckpoint("checkpoint: trailing bytes in " + path.string());
  return out;
}

}  // namespace askroute::diff
