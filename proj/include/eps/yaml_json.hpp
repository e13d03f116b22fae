#pragma once

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "eps/errors.hpp"

// Authoring documents are YAML; everything downstream consumes the same
// nlohmann::json tree the canonical interchange format produces.
namespace eps::yaml {

namespace detail {

inline nlohmann::json scalar_to_json(const YAML::Node& node) {
  const std::string& text = node.Scalar();
  // Quoted scalars carry the non-specific "!" tag and stay strings.
  if (node.Tag() == "!") return text;
  if (text == "true" || text == "True" || text == "TRUE") return true;
  if (text == "false" || text == "False" || text == "FALSE") return false;
  if (text == "~" || text == "null" || text == "Null" || text == "NULL") return nullptr;
  static const std::regex integer(R"([-+]?[0-9]+)");
  static const std::regex decimal(R"([-+]?([0-9]+\.[0-9]*|\.[0-9]+))");
  if (std::regex_match(text, integer)) {
    try {
      return std::stoll(text);
    } catch (const std::out_of_range&) {
      return text;
    }
  }
  if (std::regex_match(text, decimal)) {
    std::string t = text.front() == '+' ? text.substr(1) : text;
    if (t.front() == '.') t.insert(0, "0");
    if (t.size() > 1 && t[0] == '-' && t[1] == '.') t.insert(1, "0");
    if (t.back() == '.') t += "0";
    return nlohmann::json::parse(t);
  }
  return text;
}

}  // namespace detail

inline nlohmann::json to_json(const YAML::Node& node, const std::string& name = "<input>") {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Scalar:
      return detail::scalar_to_json(node);
    case YAML::NodeType::Sequence: {
      auto arr = nlohmann::json::array();
      for (const auto& item : node) arr.push_back(to_json(item, name));
      return arr;
    }
    case YAML::NodeType::Map: {
      auto obj = nlohmann::json::object();
      for (const auto& kv : node) {
        auto key = kv.first.Scalar();
        if (obj.contains(key)) {
          auto mark = kv.first.Mark();
          throw SyntaxError(name + ": duplicate key '" + key + "'", mark.line + 1,
                            mark.column + 1);
        }
        obj[key] = to_json(kv.second, name);
      }
      return obj;
    }
  }
  return nullptr;
}

// Parses a YAML (or JSON, which is a YAML subset) document. The optional
// name prefixes error messages.
inline nlohmann::json parse(const std::string& text, const std::string& name = "<input>") {
  try {
    return to_json(YAML::Load(text), name);
  } catch (const YAML::ParserException& e) {
    throw SyntaxError(name + ": " + e.msg, e.mark.line + 1, e.mark.column + 1);
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::json parse_file(const std::filesystem::path& path) {
  return parse(read_file(path), path.string());
}

}  // namespace eps::yaml
