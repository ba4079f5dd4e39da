#pragma once

#include "procap/config.hpp"

#include <json.hpp>

#include <set>
#include <string>

namespace procap::detail {

using Json = nlohmann::ordered_json;

/// Reads fields from a JSON object and rejects keys that were never read.
class StrictObject {
 public:
  StrictObject(const nlohmann::json& j, std::string where);

  template <typename T>
  void read(const char* key, T& out) {
    if (const auto* v = take(key)) {
      try {
        out = v->get<T>();
      } catch (const nlohmann::json::exception& e) {
        fail(key, e.what());
      }
    }
  }
  const nlohmann::json* take(const char* key);
  std::string path(const char* key) const { return where_ + "." + key; }
  /// Throws SchemaViolation naming the first unread key.
  void finish() const;

 private:
  [[noreturn]] void fail(const char* key, const std::string& why) const;

  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

Json model_config_to_json(const ModelConfig& m, bool with_seeds);
void model_config_from_json(const nlohmann::json& j, ModelConfig& m, bool with_seeds, const std::string& where);

}  // namespace procap::detail
