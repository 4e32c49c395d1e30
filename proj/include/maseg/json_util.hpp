#pragma once

#include <initializer_list>
#include <nlohmann/json.hpp>
#include <string>

#include "maseg/errors.hpp"

namespace maseg {

/// Throws ValidationError when `j` is not a JSON object or contains a key
/// outside `allowed`. `where` names the object in the message.
inline void require_known_keys(const nlohmann::json& j, const std::string& where,
                               std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw ValidationError(where + ": expected a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) { known = true; break; }
    if (!known)
      throw ValidationError(where + ": unknown key \"" + item.key() + "\"");
  }
}

/// Reads j[key] into out when present; type errors become ValidationError.
template <typename T>
void read_field(const nlohmann::json& j, const std::string& where,
                const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(where + "." + key + ": " + e.what());
  }
}

}  // namespace maseg
