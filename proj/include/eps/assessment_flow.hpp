#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "eps/errors.hpp"
#include "eps/json_reader.hpp"
#include "eps/survey_model.hpp"
#include "eps/validation.hpp"

namespace eps {

struct SingleChoice {
  std::string option;
  friend bool operator==(const SingleChoice&, const SingleChoice&) = default;
};
struct MultiChoice {
  std::vector<std::string> options;
  friend bool operator==(const MultiChoice&, const MultiChoice&) = default;
};
struct FreeText {
  std::string text;
  friend bool operator==(const FreeText&, const FreeText&) = default;
};

using Answer = std::variant<SingleChoice, MultiChoice, FreeText>;

struct ResponseSet {
  std::string survey_id;
  std::string pack_version;
  std::map<std::string, Answer> answers;  // question id -> answer

  friend bool operator==(const ResponseSet&, const ResponseSet&) = default;
};

inline nlohmann::json to_json(const ResponseSet& r) {
  auto answers = nlohmann::json::object();
  for (const auto& [qid, answer] : r.answers) {
    if (auto* s = std::get_if<SingleChoice>(&answer))
      answers[qid] = {{"choice", s->option}};
    else if (auto* m = std::get_if<MultiChoice>(&answer))
      answers[qid] = {{"choices", m->options}};
    else
      answers[qid] = {{"text", std::get<FreeText>(answer).text}};
  }
  return {{"survey_id", r.survey_id}, {"pack_version", r.pack_version}, {"answers", answers}};
}

inline ResponseSet response_set_from_json(const nlohmann::json& j) {
  detail::ObjectReader r(j, "responses");
  ResponseSet out;
  out.survey_id = r.str("survey_id");
  out.pack_version = r.str("pack_version");
  const auto& answers = r.raw("answers");
  if (!answers.is_object()) throw SchemaError("responses.answers: expected an object");
  for (auto it = answers.begin(); it != answers.end(); ++it) {
    detail::ObjectReader a(it.value(), "responses.answers." + it.key());
    int forms = int(a.has("choice")) + int(a.has("choices")) + int(a.has("text"));
    if (forms != 1)
      throw SchemaError(a.path() + ": expected exactly one of choice, choices, text");
    if (a.has("choice"))
      out.answers[it.key()] = SingleChoice{a.str("choice")};
    else if (a.has("choices"))
      out.answers[it.key()] = MultiChoice{a.strings_or_empty("choices")};
    else
      out.answers[it.key()] = FreeText{a.str("text")};
    a.finish();
  }
  r.finish();
  return out;
}

// Options chosen by an answer, in the question's option order. Unknown ids
// are skipped; validate_responses reports them.
inline std::vector<const AnswerOption*> selected_options(const Question& q, const Answer& answer) {
  std::set<std::string> chosen;
  if (auto* s = std::get_if<SingleChoice>(&answer)) chosen.insert(s->option);
  if (auto* m = std::get_if<MultiChoice>(&answer)) chosen.insert(m->options.begin(), m->options.end());
  std::vector<const AnswerOption*> out;
  for (const auto& o : q.options)
    if (chosen.count(o.id)) out.push_back(&o);
  return out;
}

inline ValidationReport validate_responses(const ResponseSet& responses,
                                           const SurveyDefinition& survey) {
  ValidationReport report;
  auto sloc = "survey:" + survey.id;
  if (responses.survey_id != survey.id)
    report.error("SURVEY_MISMATCH", sloc,
                 "responses are for survey '" + responses.survey_id + "'");

  for (const auto& [qid, answer] : responses.answers) {
    auto qloc = sloc + "/question:" + qid;
    const Question* q = survey.find_question(qid);
    if (!q) {
      report.error("UNKNOWN_QUESTION", qloc, "no such question");
      continue;
    }
    bool kind_ok = (q->kind == QuestionKind::single_choice && std::holds_alternative<SingleChoice>(answer)) ||
                   (q->kind == QuestionKind::multiple_choice && std::holds_alternative<MultiChoice>(answer)) ||
                   (q->kind == QuestionKind::open_ended && std::holds_alternative<FreeText>(answer));
    if (!kind_ok) {
      report.error("KIND_MISMATCH", qloc, "answer form does not match " + to_string(q->kind));
      continue;
    }
    if (auto* s = std::get_if<SingleChoice>(&answer)) {
      if (!q->find_option(s->option))
        report.error("UNKNOWN_OPTION", qloc, "unknown option '" + s->option + "'");
    } else if (auto* m = std::get_if<MultiChoice>(&answer)) {
      std::set<std::string> distinct;
      for (const auto& id : m->options) {
        if (!q->find_option(id)) report.error("UNKNOWN_OPTION", qloc, "unknown option '" + id + "'");
        if (!distinct.insert(id).second)
          report.error("DUPLICATE_SELECTION", qloc, "option '" + id + "' selected twice");
      }
      if (m->options.size() < q->min_select || m->options.size() > q->max_select)
        report.error("ARITY", qloc,
                     "selected " + std::to_string(m->options.size()) + " option(s); allowed " +
                         std::to_string(q->min_select) + ".." + std::to_string(q->max_select));
    } else if (std::get<FreeText>(answer).text.empty() && !q->optional) {
      report.error("EMPTY_TEXT", qloc, "mandatory open-ended answer is empty");
    }
  }

  for (const auto& q : survey.questions)
    if (!q.optional && !responses.answers.count(q.id))
      report.error("MISSING_ANSWER", sloc + "/question:" + q.id, "mandatory question unanswered");
  return report;
}

// Throws the most specific error for an invalid response set.
inline void require_valid(const ValidationReport& report, const std::string& survey_id) {
  if (report.ok()) return;
  const auto& first = report.errors.front();
  auto message = "survey '" + survey_id + "': " + first.code + " at " + first.location + ": " +
                 first.message;
  if (report.has_error("MISSING_ANSWER") || report.has_error("EMPTY_TEXT"))
    throw IncompleteResponses(message);
  if (report.has_error("UNKNOWN_OPTION")) throw UnknownOption(message);
  throw InvalidResponses(message);
}

struct TriggerSource {
  std::string question;
  std::string option;
  friend bool operator==(const TriggerSource&, const TriggerSource&) = default;
};

struct RoutingResult {
  std::vector<std::string> required_aias;  // pack order
  std::string troubleshoot;
  std::map<std::string, std::vector<TriggerSource>> rationale;

  friend bool operator==(const RoutingResult&, const RoutingResult&) = default;
};

// Required AIAs are the union of the triggers of every selected option.
inline RoutingResult route(const ResponseSet& pre_responses, const SurveyPack& pack) {
  const SurveyDefinition* pre = pack.pre_assessment();
  const SurveyDefinition* troubleshoot = pack.troubleshoot();
  if (!pre || !troubleshoot)
    throw ReferenceError("pack '" + pack.id + "' lacks a pre_assessment or troubleshoot survey");
  require_valid(validate_responses(pre_responses, *pre), pre->id);

  RoutingResult result;
  result.troubleshoot = troubleshoot->id;
  for (const auto& q : pre->questions) {
    auto it = pre_responses.answers.find(q.id);
    if (it == pre_responses.answers.end()) continue;
    for (const AnswerOption* o : selected_options(q, it->second))
      for (const auto& t : o->triggers) result.rationale[t].push_back({q.id, o->id});
  }
  for (const auto& s : pack.surveys)
    if (s.kind == SurveyKind::aia && result.rationale.count(s.id))
      result.required_aias.push_back(s.id);
  return result;
}

// Required AIAs in pack order, then the troubleshoot survey, always last.
inline std::vector<std::string> administered_set(const RoutingResult& routing) {
  auto out = routing.required_aias;
  out.push_back(routing.troubleshoot);
  return out;
}

inline nlohmann::json to_json(const RoutingResult& r) {
  auto rationale = nlohmann::json::object();
  for (const auto& [aia, sources] : r.rationale) {
    auto arr = nlohmann::json::array();
    for (const auto& s : sources) arr.push_back({{"question", s.question}, {"option", s.option}});
    rationale[aia] = arr;
  }
  return {{"required_aias", r.required_aias},
          {"troubleshoot", r.troubleshoot},
          {"administered", administered_set(r)},
          {"rationale", rationale}};
}

inline RoutingResult routing_from_json(const nlohmann::json& j) {
  RoutingResult r;
  r.required_aias = j.at("required_aias").get<std::vector<std::string>>();
  r.troubleshoot = j.at("troubleshoot").get<std::string>();
  for (auto it = j.at("rationale").begin(); it != j.at("rationale").end(); ++it)
    for (const auto& s : it.value())
      r.rationale[it.key()].push_back({s.at("question").get<std::string>(), s.at("option").get<std::string>()});
  return r;
}

}  // namespace eps
