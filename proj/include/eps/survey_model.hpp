#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "eps/errors.hpp"
#include "eps/json_reader.hpp"
#include "eps/rational.hpp"
#include "eps/validation.hpp"
#include "eps/yaml_json.hpp"

namespace eps {

inline constexpr int kPackSchemaVersion = 1;

enum class SurveyKind { pre_assessment, aia, troubleshoot };
enum class QuestionKind { single_choice, multiple_choice, open_ended };

inline std::string to_string(SurveyKind k) {
  switch (k) {
    case SurveyKind::pre_assessment: return "pre_assessment";
    case SurveyKind::aia: return "aia";
    case SurveyKind::troubleshoot: return "troubleshoot";
  }
  return "";
}

inline std::string to_string(QuestionKind k) {
  switch (k) {
    case QuestionKind::single_choice: return "single_choice";
    case QuestionKind::multiple_choice: return "multiple_choice";
    case QuestionKind::open_ended: return "open_ended";
  }
  return "";
}

inline std::optional<SurveyKind> survey_kind_from_string(std::string_view s) {
  if (s == "pre_assessment") return SurveyKind::pre_assessment;
  if (s == "aia") return SurveyKind::aia;
  if (s == "troubleshoot") return SurveyKind::troubleshoot;
  return std::nullopt;
}

inline std::optional<QuestionKind> question_kind_from_string(std::string_view s) {
  if (s == "single_choice") return QuestionKind::single_choice;
  if (s == "multiple_choice") return QuestionKind::multiple_choice;
  if (s == "open_ended") return QuestionKind::open_ended;
  return std::nullopt;
}

struct Principle {
  std::string id;
  std::string display_name;

  friend bool operator==(const Principle&, const Principle&) = default;
};

// The six principles of the recommendation matrix, in canonical order.
inline const std::vector<Principle>& catalog_principles() {
  static const std::vector<Principle> principles = {
      {"fairness", "Fairness"},         {"privacy", "Privacy"},
      {"transparency", "Transparency"}, {"reliability", "Reliability"},
      {"truthfulness", "Truthfulness"}, {"sustainability", "Sustainability"},
  };
  return principles;
}

inline bool is_catalog_principle(std::string_view id) {
  for (const auto& p : catalog_principles())
    if (p.id == id) return true;
  return false;
}

inline bool valid_principle_id(const std::string& id) {
  static const std::regex pattern("[a-z][a-z0-9_-]*");
  return std::regex_match(id, pattern);
}

struct ImpactDelta {
  std::string principle;
  Rational delta;

  friend bool operator==(const ImpactDelta&, const ImpactDelta&) = default;
};

struct AnswerOption {
  std::string id;
  std::string label;
  std::vector<ImpactDelta> deltas;    // sorted by principle id
  std::vector<std::string> triggers;  // AIA ids; sorted, unique

  Rational delta_for(std::string_view principle) const {
    for (const auto& d : deltas)
      if (d.principle == principle) return d.delta;
    return Rational(0);
  }

  friend bool operator==(const AnswerOption&, const AnswerOption&) = default;
};

struct Question {
  std::string id;
  std::string prompt;
  QuestionKind kind = QuestionKind::single_choice;
  std::vector<AnswerOption> options;
  // Meaningful for multiple_choice only; single_choice is implicitly 1..1.
  std::size_t min_select = 1;
  std::size_t max_select = 1;
  bool optional = false;

  const AnswerOption* find_option(std::string_view option_id) const {
    for (const auto& o : options)
      if (o.id == option_id) return &o;
    return nullptr;
  }

  friend bool operator==(const Question&, const Question&) = default;
};

struct SurveyDefinition {
  std::string id;
  SurveyKind kind = SurveyKind::aia;
  std::string title;
  std::string jurisdiction;
  std::string version;
  std::vector<Question> questions;

  const Question* find_question(std::string_view question_id) const {
    for (const auto& q : questions)
      if (q.id == question_id) return &q;
    return nullptr;
  }

  // Principles named by any delta in the survey, sorted.
  std::set<std::string> evaluated_principles() const {
    std::set<std::string> out;
    for (const auto& q : questions)
      for (const auto& o : q.options)
        for (const auto& d : o.deltas) out.insert(d.principle);
    return out;
  }

  friend bool operator==(const SurveyDefinition&, const SurveyDefinition&) = default;
};

struct SurveyPack {
  int schema_version = kPackSchemaVersion;
  std::string id;
  std::string version;
  std::string jurisdiction;
  std::vector<Principle> principles;
  std::vector<SurveyDefinition> surveys;  // pack order

  const SurveyDefinition* find_survey(std::string_view survey_id) const {
    for (const auto& s : surveys)
      if (s.id == survey_id) return &s;
    return nullptr;
  }

  const SurveyDefinition* first_of_kind(SurveyKind kind) const {
    for (const auto& s : surveys)
      if (s.kind == kind) return &s;
    return nullptr;
  }

  const SurveyDefinition* pre_assessment() const { return first_of_kind(SurveyKind::pre_assessment); }
  const SurveyDefinition* troubleshoot() const { return first_of_kind(SurveyKind::troubleshoot); }

  bool has_principle(std::string_view principle_id) const {
    for (const auto& p : principles)
      if (p.id == principle_id) return true;
    return false;
  }

  friend bool operator==(const SurveyPack&, const SurveyPack&) = default;
};

// Largest contribution one question can make to a principle's tally under
// any legal selection, floored at zero. For multiple_choice the selection
// must respect min_select..max_select, so the value is always attainable
// when positive.
inline Rational max_attainable(const Question& q, std::string_view principle) {
  if (q.kind == QuestionKind::open_ended || q.options.empty()) return Rational(0);
  std::vector<Rational> values;
  values.reserve(q.options.size());
  for (const auto& o : q.options) values.push_back(o.delta_for(principle));
  std::sort(values.begin(), values.end(), std::greater<>());
  if (q.kind == QuestionKind::single_choice) return std::max(Rational(0), values.front());

  Rational best(0);
  std::size_t lo = std::min(q.min_select, values.size());
  std::size_t hi = std::min(q.max_select, values.size());
  for (std::size_t i = 0; i < lo; ++i) best += values[i];
  for (std::size_t i = lo; i < hi && values[i] > 0; ++i) best += values[i];
  return std::max(Rational(0), best);
}

inline Rational max_attainable(const SurveyDefinition& s, std::string_view principle) {
  Rational total(0);
  for (const auto& q : s.questions) total += max_attainable(q, principle);
  return total;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline Rational read_delta_value(const nlohmann::json& v, const std::string& path) {
  try {
    if (v.is_string()) return parse_delta(v.get<std::string>());
    if (v.is_number_integer()) return parse_delta(std::to_string(v.get<std::int64_t>()));
    if (v.is_number_float()) return parse_delta(v.dump());
  } catch (const DeltaOutOfRange& e) {
    throw DeltaOutOfRange(path + ": " + e.what());
  } catch (const SchemaError& e) {
    throw SchemaError(path + ": " + e.what());
  }
  throw SchemaError(path + ": expected a decimal delta");
}

inline std::vector<ImpactDelta> read_deltas(const nlohmann::json& v, const std::string& path) {
  std::vector<ImpactDelta> out;
  if (v.is_object()) {
    for (auto it = v.begin(); it != v.end(); ++it)
      out.push_back({it.key(), read_delta_value(it.value(), path + "." + it.key())});
  } else if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      ObjectReader r(v[i], indexed(path, i));
      ImpactDelta d;
      d.principle = r.str("principle");
      d.delta = read_delta_value(r.raw("delta"), r.child("delta"));
      r.finish();
      out.push_back(std::move(d));
    }
  } else {
    throw SchemaError(path + ": expected an array or object of deltas");
  }
  std::sort(out.begin(), out.end(),
            [](const ImpactDelta& a, const ImpactDelta& b) { return a.principle < b.principle; });
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i].principle == out[i - 1].principle)
      throw SchemaError(path + ": more than one delta for principle '" + out[i].principle + "'");
  return out;
}

inline AnswerOption read_option(const nlohmann::json& j, const std::string& path) {
  ObjectReader r(j, path);
  AnswerOption o;
  o.id = r.str("id");
  o.label = r.str("label");
  if (r.has("deltas")) o.deltas = read_deltas(r.raw("deltas"), r.child("deltas"));
  o.triggers = r.strings_or_empty("triggers");
  std::sort(o.triggers.begin(), o.triggers.end());
  o.triggers.erase(std::unique(o.triggers.begin(), o.triggers.end()), o.triggers.end());
  r.finish();
  return o;
}

inline Question read_question(const nlohmann::json& j, const std::string& path) {
  ObjectReader r(j, path);
  Question q;
  q.id = r.str("id");
  q.prompt = r.str("prompt");
  auto kind = r.str("kind");
  auto parsed = question_kind_from_string(kind);
  if (!parsed) throw SchemaError(r.child("kind") + ": unknown question kind '" + kind + "'");
  q.kind = *parsed;
  q.optional = r.boolean_or("optional", false);
  const auto& options = r.array_or_empty("options");
  for (std::size_t i = 0; i < options.size(); ++i)
    q.options.push_back(read_option(options[i], indexed(r.child("options"), i)));
  auto min_sel = r.opt_integer("min_select");
  auto max_sel = r.opt_integer("max_select");
  if (q.kind == QuestionKind::multiple_choice) {
    if ((min_sel && *min_sel < 0) || (max_sel && *max_sel < 0))
      throw SchemaError(path + ": selection bounds must be non-negative");
    q.min_select = min_sel ? static_cast<std::size_t>(*min_sel) : 1;
    q.max_select = max_sel ? static_cast<std::size_t>(*max_sel) : q.options.size();
  } else {
    if (min_sel || max_sel)
      throw SchemaError(path + ": min_select/max_select only apply to multiple_choice");
    q.min_select = q.kind == QuestionKind::open_ended ? 0 : 1;
    q.max_select = q.kind == QuestionKind::open_ended ? 0 : 1;
  }
  r.finish();
  return q;
}

inline SurveyDefinition read_survey(const nlohmann::json& j, const std::string& path) {
  ObjectReader r(j, path);
  SurveyDefinition s;
  s.id = r.str("id");
  auto kind = r.str("kind");
  auto parsed = survey_kind_from_string(kind);
  if (!parsed) throw SchemaError(r.child("kind") + ": unknown survey kind '" + kind + "'");
  s.kind = *parsed;
  s.title = r.str("title");
  s.jurisdiction = r.str_or("jurisdiction", "");
  s.version = r.str("version");
  const auto& questions = r.array("questions");
  for (std::size_t i = 0; i < questions.size(); ++i)
    s.questions.push_back(read_question(questions[i], indexed(r.child("questions"), i)));
  r.finish();
  return s;
}

inline std::vector<Principle> read_registry(ObjectReader& r) {
  std::vector<Principle> declared;
  const auto& arr = r.array_or_empty("principles");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    ObjectReader pr(arr[i], indexed(r.child("principles"), i));
    Principle p{pr.str("id"), pr.str("display_name")};
    pr.finish();
    if (!valid_principle_id(p.id))
      throw SchemaError(pr.path() + ": principle id '" + p.id + "' must match [a-z][a-z0-9_-]*");
    for (const auto& d : declared)
      if (d.id == p.id) throw SchemaError(pr.path() + ": duplicate principle '" + p.id + "'");
    declared.push_back(std::move(p));
  }
  // Catalog principles first (canonical order), then extras as declared.
  std::vector<Principle> registry;
  for (const auto& builtin : catalog_principles()) {
    auto it = std::find_if(declared.begin(), declared.end(),
                           [&](const Principle& p) { return p.id == builtin.id; });
    registry.push_back(it == declared.end() ? builtin : *it);
  }
  for (const auto& p : declared)
    if (!is_catalog_principle(p.id)) registry.push_back(p);
  return registry;
}

inline void check_references(const SurveyPack& pack) {
  for (const auto& s : pack.surveys)
    for (const auto& q : s.questions)
      for (const auto& o : q.options) {
        auto where = "survey '" + s.id + "', question '" + q.id + "', option '" + o.id + "'";
        for (const auto& d : o.deltas)
          if (!pack.has_principle(d.principle))
            throw ReferenceError(where + ": unknown principle '" + d.principle + "'");
        for (const auto& t : o.triggers)
          if (!pack.find_survey(t))
            throw ReferenceError(where + ": trigger references unknown survey '" + t + "'");
      }
}

}  // namespace detail

// Parses the canonical JSON interchange tree (also the tree produced from the
// YAML authoring documents). Throws SchemaError, DeltaOutOfRange, or
// ReferenceError; semantic rules are left to validate_pack.
inline SurveyPack parse_pack(const nlohmann::json& doc) {
  detail::ObjectReader r(doc, "pack");
  SurveyPack pack;
  auto schema = r.integer("schema_version");
  if (schema != kPackSchemaVersion)
    throw SchemaError("pack.schema_version: unsupported version " + std::to_string(schema));
  pack.schema_version = static_cast<int>(schema);
  pack.id = r.str("id");
  pack.version = r.str("version");
  pack.jurisdiction = r.str_or("jurisdiction", "");
  pack.principles = detail::read_registry(r);
  const auto& surveys = r.array("surveys");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < surveys.size(); ++i) {
    auto s = detail::read_survey(surveys[i], detail::indexed(r.child("surveys"), i));
    if (!seen.insert(s.id).second)
      throw SchemaError("pack.surveys: duplicate survey id '" + s.id + "'");
    pack.surveys.push_back(std::move(s));
  }
  r.finish();
  detail::check_references(pack);
  return pack;
}

inline SurveyPack parse_pack_text(const std::string& json_text, const std::string& name = "<pack>") {
  return parse_pack(detail::parse_json_text(json_text, name));
}

// Loads an authoring directory: pack.yaml (manifest) listing one YAML
// document per survey, relative to the manifest.
inline SurveyPack load_pack_dir(const std::filesystem::path& dir) {
  auto manifest_path = dir / "pack.yaml";
  auto manifest = yaml::parse_file(manifest_path);
  if (!manifest.is_object()) throw SchemaError(manifest_path.string() + ": expected a mapping");
  if (!manifest.contains("surveys") || !manifest["surveys"].is_array())
    throw SchemaError(manifest_path.string() + ": 'surveys' must list survey documents");
  auto surveys = nlohmann::json::array();
  for (const auto& entry : manifest["surveys"]) {
    if (!entry.is_string())
      throw SchemaError(manifest_path.string() + ": survey entries must be file names");
    surveys.push_back(yaml::parse_file(dir / entry.get<std::string>()));
  }
  manifest["surveys"] = surveys;
  return parse_pack(manifest);
}

// Accepts an authoring directory, a pack.yaml manifest, or a canonical JSON file.
inline SurveyPack load_pack(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return load_pack_dir(path);
  if (path.extension() == ".json") return parse_pack_text(yaml::read_file(path), path.string());
  return load_pack_dir(path.parent_path());
}

// ---------------------------------------------------------------------------
// Serialization (canonical JSON; nlohmann objects keep keys sorted)

inline nlohmann::json to_json(const AnswerOption& o) {
  auto deltas = nlohmann::json::array();
  for (const auto& d : o.deltas)
    deltas.push_back({{"principle", d.principle}, {"delta", to_decimal_string(d.delta)}});
  return {{"id", o.id}, {"label", o.label}, {"deltas", deltas}, {"triggers", o.triggers}};
}

inline nlohmann::json to_json(const Question& q) {
  nlohmann::json j = {{"id", q.id},
                      {"prompt", q.prompt},
                      {"kind", to_string(q.kind)},
                      {"optional", q.optional},
                      {"options", nlohmann::json::array()}};
  for (const auto& o : q.options) j["options"].push_back(to_json(o));
  if (q.kind == QuestionKind::multiple_choice) {
    j["min_select"] = q.min_select;
    j["max_select"] = q.max_select;
  }
  return j;
}

inline nlohmann::json to_json(const SurveyDefinition& s) {
  nlohmann::json j = {{"id", s.id},
                      {"kind", to_string(s.kind)},
                      {"title", s.title},
                      {"jurisdiction", s.jurisdiction},
                      {"version", s.version},
                      {"questions", nlohmann::json::array()}};
  for (const auto& q : s.questions) j["questions"].push_back(to_json(q));
  return j;
}

inline nlohmann::json serialize_pack(const SurveyPack& pack) {
  nlohmann::json j = {{"schema_version", pack.schema_version},
                      {"id", pack.id},
                      {"version", pack.version},
                      {"jurisdiction", pack.jurisdiction},
                      {"principles", nlohmann::json::array()},
                      {"surveys", nlohmann::json::array()}};
  for (const auto& p : pack.principles)
    j["principles"].push_back({{"id", p.id}, {"display_name", p.display_name}});
  for (const auto& s : pack.surveys) j["surveys"].push_back(to_json(s));
  return j;
}

// Deterministic text form shared by every canonical JSON artifact.
inline std::string canonical_dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline std::string serialize_pack_text(const SurveyPack& pack) {
  return canonical_dump(serialize_pack(pack));
}

// ---------------------------------------------------------------------------
// Validation

struct Strictness {
  bool per_question_coverage = false;  // opt-in: >= min_principles per question
  std::size_t min_principles = 3;
  Rational mitigation_low{1, 10};
  Rational mitigation_high{3, 10};
};

// Share of an AIA's delta magnitude that lowers impact, over every delta
// that some option can contribute. nullopt when the survey has no deltas.
inline std::optional<Rational> mitigation_share(const SurveyDefinition& s) {
  Rational negative(0), total(0);
  for (const auto& q : s.questions) {
    if (q.kind == QuestionKind::open_ended) continue;
    for (const auto& o : q.options)
      for (const auto& d : o.deltas) {
        auto magnitude = d.delta < 0 ? -d.delta : d.delta;
        total += magnitude;
        if (d.delta < 0) negative += magnitude;
      }
  }
  if (total == Rational(0)) return std::nullopt;
  return negative / total;
}

inline ValidationReport validate_pack(const SurveyPack& pack, const Strictness& strictness = {}) {
  ValidationReport report;

  std::set<std::string> principle_ids;
  for (const auto& p : pack.principles) {
    auto loc = "principle:" + p.id;
    if (!valid_principle_id(p.id))
      report.error("PRINCIPLE_ID_FORMAT", loc, "principle id must match [a-z][a-z0-9_-]*");
    if (!principle_ids.insert(p.id).second)
      report.error("DUPLICATE_PRINCIPLE", loc, "principle id registered more than once");
  }
  for (const auto& c : catalog_principles())
    if (!principle_ids.count(c.id))
      report.error("MISSING_CATALOG_PRINCIPLE", "principle:" + c.id,
                   "registry lacks a catalog principle");

  std::set<std::string> survey_ids;
  std::set<std::string> aia_ids;
  int pre_count = 0, troubleshoot_count = 0;
  for (const auto& s : pack.surveys) {
    if (!survey_ids.insert(s.id).second)
      report.error("DUPLICATE_SURVEY", "survey:" + s.id, "survey id used more than once");
    if (s.kind == SurveyKind::aia) aia_ids.insert(s.id);
    if (s.kind == SurveyKind::pre_assessment) ++pre_count;
    if (s.kind == SurveyKind::troubleshoot) ++troubleshoot_count;
  }
  if (pre_count != 1)
    report.error("PRE_ASSESSMENT_COUNT", "pack:" + pack.id,
                 "expected exactly one pre_assessment survey, found " + std::to_string(pre_count));
  if (troubleshoot_count != 1)
    report.error("TROUBLESHOOT_COUNT", "pack:" + pack.id,
                 "expected exactly one troubleshoot survey, found " +
                     std::to_string(troubleshoot_count));

  for (const auto& s : pack.surveys) {
    auto sloc = "survey:" + s.id;
    if (s.questions.empty()) report.error("EMPTY_SURVEY", sloc, "survey has no questions");
    bool scored = s.kind == SurveyKind::aia;
    bool unscored_deltas = false;
    std::set<std::string> question_ids;

    for (const auto& q : s.questions) {
      auto qloc = sloc + "/question:" + q.id;
      if (!question_ids.insert(q.id).second)
        report.error("DUPLICATE_QUESTION", qloc, "question id used more than once");
      std::set<std::string> option_ids;
      std::set<std::string> question_principles;

      switch (q.kind) {
        case QuestionKind::open_ended:
          if (!q.options.empty())
            report.error("OPEN_ENDED_OPTIONS", qloc, "open_ended questions take no options");
          break;
        case QuestionKind::single_choice:
          if (q.options.size() < 2)
            report.error("SINGLE_CHOICE_OPTIONS", qloc, "single_choice needs at least 2 options");
          break;
        case QuestionKind::multiple_choice:
          if (!(1 <= q.min_select && q.min_select <= q.max_select &&
                q.max_select <= q.options.size()))
            report.error("SELECT_BOUNDS", qloc,
                         "need 1 <= min_select <= max_select <= number of options");
          break;
      }

      for (const auto& o : q.options) {
        auto oloc = qloc + "/option:" + o.id;
        if (!option_ids.insert(o.id).second)
          report.error("DUPLICATE_OPTION", oloc, "option id used more than once");
        std::set<std::string> option_principles;
        for (const auto& d : o.deltas) {
          if (d.delta > 1 || d.delta < -1)
            report.error("DELTA_OUT_OF_RANGE", oloc, "delta outside [-1, 1] for " + d.principle);
          if (100 % d.delta.denominator() != 0)
            report.error("DELTA_PRECISION", oloc, "delta not a multiple of 0.01 for " + d.principle);
          if (!option_principles.insert(d.principle).second)
            report.error("DUPLICATE_DELTA", oloc, "more than one delta for " + d.principle);
          if (!principle_ids.count(d.principle))
            report.error("UNKNOWN_PRINCIPLE", oloc, "principle '" + d.principle + "' not registered");
          question_principles.insert(d.principle);
          if (!scored) unscored_deltas = true;
        }
        if (!o.triggers.empty() && s.kind != SurveyKind::pre_assessment)
          report.error("TRIGGER_OUTSIDE_PRE_ASSESSMENT", oloc,
                       "only pre_assessment options may trigger surveys");
        for (const auto& t : o.triggers)
          if (!aia_ids.count(t))
            report.error("UNKNOWN_TRIGGER", oloc, "trigger '" + t + "' is not an AIA in this pack");
      }

      if (scored && q.kind != QuestionKind::open_ended) {
        if (question_principles.empty())
          report.error("QUESTION_WITHOUT_DELTAS", qloc, "scored question carries no deltas");
        else if (strictness.per_question_coverage &&
                 question_principles.size() < strictness.min_principles)
          report.error("PRINCIPLE_COVERAGE", qloc,
                       "question evaluates " + std::to_string(question_principles.size()) +
                           " principle(s); strict mode needs " +
                           std::to_string(strictness.min_principles));
      }
    }

    if (!scored) {
      if (unscored_deltas)
        report.warn("UNSCORED_DELTAS", sloc, "deltas outside an AIA are ignored by scoring");
      continue;
    }

    auto evaluated = s.evaluated_principles();
    if (evaluated.size() < strictness.min_principles)
      report.error("PRINCIPLE_COVERAGE", sloc,
                   "AIA evaluates " + std::to_string(evaluated.size()) +
                       " principle(s); at least " + std::to_string(strictness.min_principles) +
                       " required");
    for (const auto& p : evaluated)
      if (max_attainable(s, p) <= 0)
        report.error("ZERO_MAX_SCORE", sloc + "/principle:" + p,
                     "no legal selection raises impact on this principle");
    if (auto share = mitigation_share(s)) {
      if (*share < strictness.mitigation_low || *share > strictness.mitigation_high)
        report.warn("MITIGATION_SHARE", sloc,
                    "mitigation share " + to_decimal_string(*share) + " outside [" +
                        to_decimal_string(strictness.mitigation_low) + ", " +
                        to_decimal_string(strictness.mitigation_high) + "]");
    }
  }
  return report;
}

}  // namespace eps
