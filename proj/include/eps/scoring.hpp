#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "eps/assessment_flow.hpp"
#include "eps/errors.hpp"
#include "eps/rational.hpp"
#include "eps/survey_model.hpp"

namespace eps {

enum class ImpactLevel { low = 0, intermediate = 1, high = 2 };

inline std::string to_string(ImpactLevel level) {
  switch (level) {
    case ImpactLevel::low: return "low";
    case ImpactLevel::intermediate: return "intermediate";
    case ImpactLevel::high: return "high";
  }
  return "";
}

inline std::optional<ImpactLevel> impact_level_from_string(std::string_view s) {
  if (s == "low") return ImpactLevel::low;
  if (s == "intermediate") return ImpactLevel::intermediate;
  if (s == "high") return ImpactLevel::high;
  return std::nullopt;
}

inline const std::vector<ImpactLevel>& all_levels() {
  static const std::vector<ImpactLevel> levels = {ImpactLevel::low, ImpactLevel::intermediate,
                                                  ImpactLevel::high};
  return levels;
}

struct PrincipleTally {
  std::string principle;
  Rational raw_score;
  Rational max_score;

  friend bool operator==(const PrincipleTally&, const PrincipleTally&) = default;
};

using TallyMap = std::map<std::string, PrincipleTally>;
using ScoreMap = std::map<std::string, Rational>;

// raw(p) sums the deltas of every selected option; max(p) sums each
// question's best legal contribution. Principles with max = 0 are omitted.
inline TallyMap tally(const ResponseSet& responses, const SurveyDefinition& survey) {
  if (survey.kind != SurveyKind::aia)
    throw InvalidResponses("survey '" + survey.id + "' is not an AIA and is not scored");
  require_valid(validate_responses(responses, survey), survey.id);

  TallyMap out;
  for (const auto& principle : survey.evaluated_principles()) {
    Rational max = max_attainable(survey, principle);
    if (max <= 0) continue;
    Rational raw(0);
    for (const auto& q : survey.questions) {
      auto it = responses.answers.find(q.id);
      if (it == responses.answers.end()) continue;
      for (const AnswerOption* o : selected_options(q, it->second)) raw += o->delta_for(principle);
    }
    out[principle] = {principle, raw, max};
  }
  return out;
}

inline Rational impact_score(const PrincipleTally& t) {
  if (t.max_score <= 0)
    throw ZeroMaxScore("principle '" + t.principle + "' has no attainable impact");
  return t.raw_score / t.max_score;
}

inline Rational aia_score(const ScoreMap& impact_scores) {
  if (impact_scores.empty()) throw EmptyPrincipleSet("AIA score needs at least one principle");
  Rational sum(0);
  for (const auto& [_, s] : impact_scores) sum += s;
  return sum / static_cast<std::int64_t>(impact_scores.size());
}

// Pools evidence across AIAs: sum of raw over sum of max, per principle.
inline ScoreMap combine(const std::vector<std::pair<std::string, TallyMap>>& per_aia) {
  std::map<std::string, std::pair<Rational, Rational>> pooled;
  for (const auto& [_, tallies] : per_aia)
    for (const auto& [p, t] : tallies) {
      auto& acc = pooled[p];
      acc.first += t.raw_score;
      acc.second += t.max_score;
    }
  ScoreMap out;
  for (const auto& [p, acc] : pooled) out[p] = acc.first / acc.second;
  return out;
}

struct Thresholds {
  Rational low{1, 3};
  Rational high{2, 3};

  void validate() const {
    if (!(0 < low && low < high && high <= 1))
      throw InvalidThresholds("thresholds must satisfy 0 < low < high <= 1 (got " +
                              to_decimal_string(low) + ", " + to_decimal_string(high) + ")");
  }

  friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

// "0.25,0.75" or "1/4,3/4".
inline Thresholds parse_thresholds(const std::string& text) {
  auto comma = text.find(',');
  if (comma == std::string::npos)
    throw InvalidThresholds("expected '<low>,<high>', got '" + text + "'");
  Thresholds t;
  try {
    t.low = parse_rational(text.substr(0, comma));
    t.high = parse_rational(text.substr(comma + 1));
  } catch (const SchemaError& e) {
    throw InvalidThresholds(e.what());
  }
  t.validate();
  return t;
}

// Levels are defined on [0, 1]; scores are clamped before classification.
// Bands are half-open upward: [0, low) low, [low, high) intermediate, [high, 1] high.
inline ImpactLevel suggest_level(const Rational& score, const Thresholds& thresholds = {}) {
  thresholds.validate();
  Rational s = clamp_unit(score);
  if (s < thresholds.low) return ImpactLevel::low;
  if (s < thresholds.high) return ImpactLevel::intermediate;
  return ImpactLevel::high;
}

struct AiaResult {
  std::string aia_id;
  TallyMap tallies;
  ScoreMap impact_scores;
  Rational aia_score;

  friend bool operator==(const AiaResult&, const AiaResult&) = default;
};

struct ScoreCard {
  std::string session_id;
  std::string pack_id;
  std::string pack_version;
  Thresholds thresholds;
  std::vector<AiaResult> aias;  // routing order
  ScoreMap combined;
  std::map<std::string, ImpactLevel> suggested_levels;

  friend bool operator==(const ScoreCard&, const ScoreCard&) = default;
};

inline AiaResult score_aia(const ResponseSet& responses, const SurveyDefinition& survey) {
  AiaResult r;
  r.aia_id = survey.id;
  r.tallies = tally(responses, survey);
  for (const auto& [p, t] : r.tallies) r.impact_scores[p] = impact_score(t);
  r.aia_score = aia_score(r.impact_scores);
  return r;
}

// Scores every routed AIA. `responses` is keyed by survey id; a routed AIA
// without responses raises IncompleteResponses naming it.
inline ScoreCard score_session(const std::string& session_id, const SurveyPack& pack,
                               const RoutingResult& routing,
                               const std::map<std::string, ResponseSet>& responses,
                               const Thresholds& thresholds = {}) {
  thresholds.validate();
  ScoreCard card;
  card.session_id = session_id;
  card.pack_id = pack.id;
  card.pack_version = pack.version;
  card.thresholds = thresholds;
  std::vector<std::pair<std::string, TallyMap>> per_aia;
  for (const auto& aia_id : routing.required_aias) {
    const SurveyDefinition* survey = pack.find_survey(aia_id);
    if (!survey) throw ReferenceError("routed AIA '" + aia_id + "' not in pack");
    auto it = responses.find(aia_id);
    if (it == responses.end())
      throw IncompleteResponses("missing responses for required survey '" + aia_id + "'");
    card.aias.push_back(score_aia(it->second, *survey));
    per_aia.emplace_back(aia_id, card.aias.back().tallies);
  }
  if (!per_aia.empty()) card.combined = combine(per_aia);
  for (const auto& [p, s] : card.combined) card.suggested_levels[p] = suggest_level(s, thresholds);
  return card;
}

inline nlohmann::json to_json(const Thresholds& t) {
  return {{"low", rational_to_json(t.low)}, {"high", rational_to_json(t.high)}};
}

inline nlohmann::json to_json(const ScoreCard& card) {
  auto aias = nlohmann::json::array();
  for (const auto& a : card.aias) {
    auto principles = nlohmann::json::object();
    for (const auto& [p, t] : a.tallies)
      principles[p] = {{"raw_score", rational_to_json(t.raw_score)},
                       {"max_score", rational_to_json(t.max_score)},
                       {"impact_score", rational_to_json(a.impact_scores.at(p))}};
    aias.push_back({{"aia", a.aia_id},
                    {"aia_score", rational_to_json(a.aia_score)},
                    {"evaluated_principles", a.tallies.size()},
                    {"principles", principles}});
  }
  auto combined = nlohmann::json::object();
  for (const auto& [p, s] : card.combined) combined[p] = rational_to_json(s);
  auto levels = nlohmann::json::object();
  for (const auto& [p, l] : card.suggested_levels) levels[p] = to_string(l);
  return {{"session_id", card.session_id},
          {"pack_id", card.pack_id},
          {"pack_version", card.pack_version},
          {"thresholds", to_json(card.thresholds)},
          {"aias", aias},
          {"combined", combined},
          {"suggested_levels", levels}};
}

inline ImpactLevel level_from_json(const nlohmann::json& j) {
  auto level = j.is_string() ? impact_level_from_string(j.get<std::string>()) : std::nullopt;
  if (!level) throw SchemaError("expected an impact level (low, intermediate, high)");
  return *level;
}

inline ScoreCard score_card_from_json(const nlohmann::json& j) {
  ScoreCard card;
  card.session_id = j.at("session_id").get<std::string>();
  card.pack_id = j.at("pack_id").get<std::string>();
  card.pack_version = j.at("pack_version").get<std::string>();
  card.thresholds.low = rational_from_json(j.at("thresholds").at("low"));
  card.thresholds.high = rational_from_json(j.at("thresholds").at("high"));
  for (const auto& a : j.at("aias")) {
    AiaResult r;
    r.aia_id = a.at("aia").get<std::string>();
    r.aia_score = rational_from_json(a.at("aia_score"));
    for (auto it = a.at("principles").begin(); it != a.at("principles").end(); ++it) {
      r.tallies[it.key()] = {it.key(), rational_from_json(it.value().at("raw_score")),
                             rational_from_json(it.value().at("max_score"))};
      r.impact_scores[it.key()] = rational_from_json(it.value().at("impact_score"));
    }
    card.aias.push_back(std::move(r));
  }
  for (auto it = j.at("combined").begin(); it != j.at("combined").end(); ++it)
    card.combined[it.key()] = rational_from_json(it.value());
  for (auto it = j.at("suggested_levels").begin(); it != j.at("suggested_levels").end(); ++it)
    card.suggested_levels[it.key()] = level_from_json(it.value());
  return card;
}

}  // namespace eps
