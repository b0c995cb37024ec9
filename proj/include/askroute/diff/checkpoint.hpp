#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "askroute/diff/params.hpp"
#include "json.hpp"

namespace askroute::diff {

class CorruptCheckpoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  NamedTensors<float> tensors;
  /// Free-form metadata stored in the manifest (model config, flags).
  nlohmann::json meta = nlohmann::json::object();
};

/// Layout: "ASKC1", u64 little-endian manifest length, manifest JSON
/// {"tensors": [{"name", "shape"}...], "meta": {...}}, then every tensor's
/// values as little-endian float32 in manifest order.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace askroute::diff
