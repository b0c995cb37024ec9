#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include "askroute/errors.hpp"
#include "json.hpp"

namespace askroute {

/// Throws ConfigError naming the first key of `j` not in `known`.
inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> known, std::string_view what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool found = false;
    for (auto k : known) found = found || k == key;
    if (!found) throw ConfigError(std::string(what) + ": unknown key '" + key + "'");
  }
}

/// Reads `key` into `out` when present, converting type errors to ConfigError.
template <typename T>
void read_optional(const nlohmann::json& j, const char* key, T& out, std::string_view what) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(what) + ": bad value for '" + key + "': " + e.what());
  }
}

}  // namespace askroute
