#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eps/errors.hpp"

namespace eps::detail {

// Schema-checked access to one JSON object. Every key the caller asks for
// (present or not) is recorded; finish() rejects any key never asked for.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw SchemaError(path_ + ": expected an object");
  }

  const std::string& path() const { return path_; }
  std::string child(const std::string& key) const { return path_ + "." + key; }

  bool has(const std::string& key) {
    known_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const nlohmann::json& raw(const std::string& key) {
    if (!has(key)) throw SchemaError(path_ + ": missing required field '" + key + "'");
    return j_.at(key);
  }

  std::string str(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_string()) throw SchemaError(child(key) + ": expected a string");
    return v.get<std::string>();
  }

  std::string str_or(const std::string& key, const std::string& fallback) {
    return has(key) ? str(key) : fallback;
  }

  std::int64_t integer(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_number_integer()) throw SchemaError(child(key) + ": expected an integer");
    return v.get<std::int64_t>();
  }

  std::optional<std::int64_t> opt_integer(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return integer(key);
  }

  bool boolean_or(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw SchemaError(child(key) + ": expected a boolean");
    return v.get<bool>();
  }

  const nlohmann::json& array(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_array()) throw SchemaError(child(key) + ": expected an array");
    return v;
  }

  const nlohmann::json& array_or_empty(const std::string& key) {
    static const nlohmann::json empty = nlohmann::json::array();
    return has(key) ? array(key) : empty;
  }

  std::vector<std::string> strings_or_empty(const std::string& key) {
    std::vector<std::string> out;
    const auto& arr = array_or_empty(key);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_string())
        throw SchemaError(child(key) + "[" + std::to_string(i) + "]: expected a string");
      out.push_back(arr[i].get<std::string>());
    }
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!known_.count(it.key()))
        throw SchemaError(path_ + ": unknown field '" + it.key() + "'");
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> known_;
};

inline std::string indexed(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

// Parses a JSON document, converting nlohmann's byte offset into line/column.
inline nlohmann::json parse_json_text(const std::string& text, const std::string& name) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw SyntaxError(name + ": malformed JSON", line, column);
  }
}

}  // namespace eps::detail
