#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace eps {

struct Finding {
  std::string code;      // e.g. "PRINCIPLE_COVERAGE"
  std::string location;  // e.g. "survey:privacy/question:q2"
  std::string message;

  friend bool operator==(const Finding&, const Finding&) = default;
};

// Report-style result: validation never throws, it collects.
struct ValidationReport {
  std::vector<Finding> errors;
  std::vector<Finding> warnings;

  bool ok() const { return errors.empty(); }

  void error(std::string code, std::string location, std::string message) {
    errors.push_back({std::move(code), std::move(location), std::move(message)});
  }
  void warn(std::string code, std::string location, std::string message) {
    warnings.push_back({std::move(code), std::move(location), std::move(message)});
  }

  bool has_error(const std::string& code) const {
    for (const auto& f : errors)
      if (f.code == code) return true;
    return false;
  }
  bool has_warning(const std::string& code) const {
    for (const auto& f : warnings)
      if (f.code == code) return true;
    return false;
  }

  void merge(const ValidationReport& other) {
    errors.insert(errors.end(), other.errors.begin(), other.errors.end());
    warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
  }
};

inline nlohmann::json to_json(const Finding& f) {
  return {{"code", f.code}, {"location", f.location}, {"message", f.message}};
}

inline nlohmann::json to_json(const ValidationReport& report) {
  auto errors = nlohmann::json::array();
  auto warnings = nlohmann::json::array();
  for (const auto& f : report.errors) errors.push_back(to_json(f));
  for (const auto& f : report.warnings) warnings.push_back(to_json(f));
  return {{"ok", report.ok()}, {"errors", errors}, {"warnings", warnings}};
}

inline std::string to_text(const ValidationReport& report) {
  std::string out;
  for (const auto& f : report.errors)
    out += "error   " + f.code + " [" + f.location + "] " + f.message + "\n";
  for (const auto& f : report.warnings)
    out += "warning " + f.code + " [" + f.location + "] " + f.message + "\n";
  out += std::to_string(report.errors.size()) + " error(s), " +
         std::to_string(report.warnings.size()) + " warning(s)\n";
  return out;
}

}  // namespace eps
