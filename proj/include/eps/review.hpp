#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "eps/assessment_flow.hpp"
#include "eps/errors.hpp"
#include "eps/hash.hpp"
#include "eps/scoring.hpp"
#include "eps/survey_model.hpp"

namespace eps {

enum class SessionState {
  draft,
  responses_submitted,
  scored,
  under_review,
  framed,
  report_issued,
  withdrawn,
};

enum class EventKind {
  created,
  submit_responses,
  scored,
  review_opened,
  framed,
  report_issued,
  withdrawn,
};

enum class Role { respondent, evaluator, admin };

inline std::string to_string(SessionState s) {
  switch (s) {
    case SessionState::draft: return "draft";
    case SessionState::responses_submitted: return "responses_submitted";
    case SessionState::scored: return "scored";
    case SessionState::under_review: return "under_review";
    case SessionState::framed: return "framed";
    case SessionState::report_issued: return "report_issued";
    case SessionState::withdrawn: return "withdrawn";
  }
  return "";
}

inline std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::created: return "Created";
    case EventKind::submit_responses: return "SubmitResponses";
    case EventKind::scored: return "Scored";
    case EventKind::review_opened: return "ReviewOpened";
    case EventKind::framed: return "Framed";
    case EventKind::report_issued: return "ReportIssued";
    case EventKind::withdrawn: return "Withdrawn";
  }
  return "";
}

inline std::string to_string(Role r) {
  switch (r) {
    case Role::respondent: return "respondent";
    case Role::evaluator: return "evaluator";
    case Role::admin: return "admin";
  }
  return "";
}

inline std::optional<SessionState> session_state_from_string(std::string_view s) {
  for (auto st : {SessionState::draft, SessionState::responses_submitted, SessionState::scored,
                  SessionState::under_review, SessionState::framed, SessionState::report_issued,
                  SessionState::withdrawn})
    if (to_string(st) == s) return st;
  return std::nullopt;
}

inline std::optional<EventKind> event_kind_from_string(std::string_view s) {
  for (auto k : {EventKind::created, EventKind::submit_responses, EventKind::scored,
                 EventKind::review_opened, EventKind::framed, EventKind::report_issued,
                 EventKind::withdrawn})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

inline std::optional<Role> role_from_string(std::string_view s) {
  if (s == "respondent") return Role::respondent;
  if (s == "evaluator") return Role::evaluator;
  if (s == "admin") return Role::admin;
  return std::nullopt;
}

inline bool is_terminal(SessionState s) {
  return s == SessionState::report_issued || s == SessionState::withdrawn;
}

// The bare transition table, without payload guards. `from` is empty for a
// session that has no events yet.
inline std::optional<SessionState> next_state(std::optional<SessionState> from, EventKind kind) {
  if (!from) {
    if (kind == EventKind::created) return SessionState::draft;
    return std::nullopt;
  }
  if (kind == EventKind::withdrawn && !is_terminal(*from)) return SessionState::withdrawn;
  switch (kind) {
    case EventKind::submit_responses:
      if (*from == SessionState::draft || *from == SessionState::responses_submitted)
        return SessionState::responses_submitted;
      break;
    case EventKind::scored:
      if (*from == SessionState::responses_submitted) return SessionState::scored;
      break;
    case EventKind::review_opened:
      if (*from == SessionState::scored) return SessionState::under_review;
      break;
    case EventKind::framed:
      // A later framing round supersedes the previous one.
      if (*from == SessionState::under_review || *from == SessionState::framed)
        return SessionState::framed;
      break;
    case EventKind::report_issued:
      if (*from == SessionState::framed) return SessionState::report_issued;
      break;
    default:
      break;
  }
  return std::nullopt;
}

struct Actor {
  std::string id;
  Role role = Role::respondent;
  friend bool operator==(const Actor&, const Actor&) = default;
};

struct SessionEvent {
  std::uint64_t seq = 0;
  EventKind kind = EventKind::created;
  Actor actor;
  nlohmann::json payload = nlohmann::json::object();
  std::string timestamp;

  friend bool operator==(const SessionEvent&, const SessionEvent&) = default;
};

inline nlohmann::json to_json(const SessionEvent& e) {
  return {{"seq", e.seq},
          {"kind", to_string(e.kind)},
          {"actor", {{"id", e.actor.id}, {"role", to_string(e.actor.role)}}},
          {"payload", e.payload},
          {"timestamp", e.timestamp}};
}

inline SessionEvent event_from_json(const nlohmann::json& j) {
  SessionEvent e;
  e.seq = j.at("seq").get<std::uint64_t>();
  auto kind = event_kind_from_string(j.at("kind").get<std::string>());
  auto role = role_from_string(j.at("actor").at("role").get<std::string>());
  if (!kind || !role) throw SchemaError("event: unknown kind or role");
  e.kind = *kind;
  e.actor = {j.at("actor").at("id").get<std::string>(), *role};
  e.payload = j.at("payload");
  e.timestamp = j.at("timestamp").get<std::string>();
  return e;
}

// Each link hashes the previous head with the event's canonical JSON.
inline std::string chain_hash(const std::string& previous, const SessionEvent& e) {
  return sha256_hex(previous + "\n" + to_json(e).dump());
}

inline std::string hash_chain_head(const std::vector<SessionEvent>& events) {
  std::string head = genesis_hash();
  for (const auto& e : events) head = chain_hash(head, e);
  return head;
}

struct Subject {
  std::string organization;
  std::string system_name;
  std::string description;
  friend bool operator==(const Subject&, const Subject&) = default;
};

inline nlohmann::json to_json(const Subject& s) {
  return {{"organization", s.organization},
          {"system_name", s.system_name},
          {"description", s.description}};
}

inline Subject subject_from_json(const nlohmann::json& j) {
  detail::ObjectReader r(j, "subject");
  Subject s{r.str("organization"), r.str("system_name"), r.str_or("description", "")};
  r.finish();
  return s;
}

struct FramingDecision {
  std::string principle;
  std::optional<ImpactLevel> suggested_level;  // absent for unscored principles
  ImpactLevel final_level = ImpactLevel::low;
  std::string rationale;
  std::string evaluator;
  std::string timestamp;

  bool is_override() const { return suggested_level && *suggested_level != final_level; }
  bool rationale_required() const { return !suggested_level || is_override(); }

  friend bool operator==(const FramingDecision&, const FramingDecision&) = default;
};

inline nlohmann::json to_json(const FramingDecision& d) {
  return {{"principle", d.principle},
          {"suggested_level", d.suggested_level ? nlohmann::json(to_string(*d.suggested_level))
                                                : nlohmann::json(nullptr)},
          {"final_level", to_string(d.final_level)},
          {"rationale", d.rationale},
          {"evaluator", d.evaluator},
          {"timestamp", d.timestamp}};
}

inline FramingDecision framing_decision_from_json(const nlohmann::json& j) {
  FramingDecision d;
  d.principle = j.at("principle").get<std::string>();
  if (!j.at("suggested_level").is_null()) d.suggested_level = level_from_json(j.at("suggested_level"));
  d.final_level = level_from_json(j.at("final_level"));
  d.rationale = j.at("rationale").get<std::string>();
  d.evaluator = j.at("evaluator").get<std::string>();
  d.timestamp = j.at("timestamp").get<std::string>();
  return d;
}

// What an evaluator submits for one principle; the suggestion is filled in
// from the session's score card, never taken from the caller.
struct FramingInput {
  std::string principle;
  ImpactLevel final_level = ImpactLevel::low;
  std::string rationale;
};

struct FramingRound {
  std::uint64_t seq = 0;
  std::vector<FramingDecision> decisions;  // sorted by principle
  friend bool operator==(const FramingRound&, const FramingRound&) = default;
};

struct AssessmentSession {
  std::string id;
  Subject subject;
  std::string pack_id;
  std::string pack_version;
  std::string pre_assessment_id;
  std::string troubleshoot_id;
  std::string owner;
  std::optional<SessionState> state;  // empty until Created
  std::vector<SessionEvent> events;

  std::map<std::string, ResponseSet> responses;  // latest per survey
  std::optional<RoutingResult> routing;
  std::optional<ScoreCard> score_card;
  std::vector<FramingRound> framing_rounds;
  std::string catalog_version;

  const FramingRound* current_framing() const {
    return framing_rounds.empty() ? nullptr : &framing_rounds.back();
  }

  std::uint64_t head_seq() const { return events.empty() ? 0 : events.back().seq; }

  friend bool operator==(const AssessmentSession&, const AssessmentSession&) = default;
};

// Principles a framing round must cover: every scored principle plus the
// six catalog principles.
inline std::vector<std::string> framing_scope(const AssessmentSession& s) {
  std::set<std::string> scope;
  for (const auto& p : catalog_principles()) scope.insert(p.id);
  if (s.score_card)
    for (const auto& [p, _] : s.score_card->suggested_levels) scope.insert(p);
  return {scope.begin(), scope.end()};
}

// Surveys whose responses must be present before scoring.
inline std::vector<std::string> missing_surveys(const AssessmentSession& s) {
  std::vector<std::string> missing;
  if (!s.responses.count(s.pre_assessment_id)) missing.push_back(s.pre_assessment_id);
  if (s.routing)
    for (const auto& id : administered_set(*s.routing))
      if (!s.responses.count(id)) missing.push_back(id);
  return missing;
}

namespace detail {

inline void check_framing(const AssessmentSession& s, const std::vector<FramingDecision>& decisions) {
  auto scope = framing_scope(s);
  std::set<std::string> covered;
  for (const auto& d : decisions) {
    if (std::find(scope.begin(), scope.end(), d.principle) == scope.end())
      throw IncompleteCoverage("principle '" + d.principle + "' is outside the framing scope");
    if (!covered.insert(d.principle).second)
      throw IncompleteCoverage("principle '" + d.principle + "' framed twice in one round");
    std::optional<ImpactLevel> expected;
    if (s.score_card) {
      auto it = s.score_card->suggested_levels.find(d.principle);
      if (it != s.score_card->suggested_levels.end()) expected = it->second;
    }
    if (d.suggested_level != expected)
      throw IllegalTransition("suggested level for '" + d.principle +
                              "' does not match the score card");
    if (d.rationale_required() && d.rationale.empty())
      throw MissingRationale("principle '" + d.principle + "': final level " +
                             to_string(d.final_level) +
                             (d.suggested_level ? " overrides suggested " + to_string(*d.suggested_level)
                                                : " has no scored suggestion") +
                             "; a rationale is required");
  }
  for (const auto& p : scope)
    if (!covered.count(p)) throw IncompleteCoverage("principle '" + p + "' has no framing decision");
}

}  // namespace detail

// Validates `event` against the table and its guards, then returns the
// session with the event applied. The input session is never modified.
inline AssessmentSession transition(const AssessmentSession& session, const SessionEvent& event) {
  if (event.seq != session.head_seq() + 1)
    throw SequenceConflict("event seq " + std::to_string(event.seq) + " does not follow head " +
                           std::to_string(session.head_seq()));
  auto to = next_state(session.state, event.kind);
  if (!to)
    throw IllegalTransition("cannot apply " + to_string(event.kind) + " in state " +
                            (session.state ? to_string(*session.state) : std::string("<none>")));

  AssessmentSession next = session;
  const auto& p = event.payload;
  try {
    switch (event.kind) {
      case EventKind::created:
        next.id = p.at("session_id").get<std::string>();
        next.subject = subject_from_json(p.at("subject"));
        next.pack_id = p.at("pack_id").get<std::string>();
        next.pack_version = p.at("pack_version").get<std::string>();
        next.pre_assessment_id = p.at("pre_assessment").get<std::string>();
        next.troubleshoot_id = p.at("troubleshoot").get<std::string>();
        next.owner = event.actor.id;
        break;

      case EventKind::submit_responses: {
        auto responses = response_set_from_json(p.at("responses"));
        if (responses.pack_version != session.pack_version)
          throw InvalidResponses("responses pinned to pack version '" + responses.pack_version +
                                 "', session uses '" + session.pack_version + "'");
        if (responses.survey_id == session.pre_assessment_id) {
          next.routing = routing_from_json(p.at("routing"));
        } else {
          if (!session.routing)
            throw IllegalTransition("survey '" + responses.survey_id +
                                    "' submitted before the pre-assessment");
          auto administered = administered_set(*session.routing);
          if (std::find(administered.begin(), administered.end(), responses.survey_id) ==
              administered.end())
            throw InvalidResponses("survey '" + responses.survey_id + "' is not administered");
        }
        next.responses[responses.survey_id] = std::move(responses);
        break;
      }

      case EventKind::scored: {
        auto missing = missing_surveys(session);
        if (!missing.empty())
          throw IllegalTransition("cannot score: missing responses for survey '" + missing.front() + "'");
        auto card = score_card_from_json(p.at("score_card"));
        std::vector<std::string> scored_ids;
        for (const auto& a : card.aias) scored_ids.push_back(a.aia_id);
        if (scored_ids != session.routing->required_aias)
          throw IllegalTransition("score card does not cover exactly the routed AIAs");
        next.score_card = std::move(card);
        break;
      }

      case EventKind::review_opened:
        break;

      case EventKind::framed: {
        FramingRound round;
        round.seq = event.seq;
        for (const auto& d : p.at("decisions")) round.decisions.push_back(framing_decision_from_json(d));
        detail::check_framing(session, round.decisions);
        std::sort(round.decisions.begin(), round.decisions.end(),
                  [](const auto& a, const auto& b) { return a.principle < b.principle; });
        next.framing_rounds.push_back(std::move(round));
        break;
      }

      case EventKind::report_issued:
        if (!session.current_framing()) throw IllegalTransition("cannot issue report: no framing");
        next.catalog_version = p.at("catalog_version").get<std::string>();
        break;

      case EventKind::withdrawn:
        break;
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(to_string(event.kind) + " payload: " + e.what());
  }
  next.state = *to;
  next.events.push_back(event);
  return next;
}

// Current state is a pure left fold of the log.
inline AssessmentSession fold(const std::vector<SessionEvent>& events) {
  AssessmentSession s;
  for (const auto& e : events) s = transition(s, e);
  return s;
}

inline SessionEvent next_event(const AssessmentSession& s, EventKind kind, const Actor& actor,
                               nlohmann::json payload, const std::string& timestamp) {
  return {s.head_seq() + 1, kind, actor, std::move(payload), timestamp};
}

// ---------------------------------------------------------------------------
// Commands: each builds the next event and applies it through transition().

inline AssessmentSession create_session(const std::string& session_id, const Subject& subject,
                                        const SurveyPack& pack, const Actor& actor,
                                        const std::string& timestamp) {
  if (!pack.pre_assessment() || !pack.troubleshoot())
    throw ReferenceError("pack '" + pack.id + "' lacks a pre_assessment or troubleshoot survey");
  AssessmentSession empty;
  return transition(empty, next_event(empty, EventKind::created, actor,
                                      {{"session_id", session_id},
                                       {"subject", to_json(subject)},
                                       {"pack_id", pack.id},
                                       {"pack_version", pack.version},
                                       {"pre_assessment", pack.pre_assessment()->id},
                                       {"troubleshoot", pack.troubleshoot()->id}},
                                      timestamp));
}

inline AssessmentSession submit_responses(const AssessmentSession& s, const ResponseSet& responses,
                                          const SurveyPack& pack, const Actor& actor,
                                          const std::string& timestamp) {
  if (pack.id != s.pack_id || pack.version != s.pack_version)
    throw InvalidResponses("session is pinned to pack " + s.pack_id + "@" + s.pack_version);
  const SurveyDefinition* survey = pack.find_survey(responses.survey_id);
  if (!survey) throw ReferenceError("unknown survey '" + responses.survey_id + "'");
  nlohmann::json payload = {{"responses", to_json(responses)}, {"survey_kind", to_string(survey->kind)}};
  if (survey->kind == SurveyKind::pre_assessment) {
    payload["routing"] = to_json(route(responses, pack));
  } else {
    require_valid(validate_responses(responses, *survey), survey->id);
  }
  return transition(s, next_event(s, EventKind::submit_responses, actor, payload, timestamp));
}

inline std::string inputs_digest(const AssessmentSession& s) {
  auto inputs = nlohmann::json::object();
  for (const auto& [id, r] : s.responses) inputs[id] = to_json(r);
  return sha256_hex(s.pack_id + "@" + s.pack_version + "\n" + inputs.dump());
}

inline AssessmentSession score(const AssessmentSession& s, const SurveyPack& pack,
                               const Thresholds& thresholds, const Actor& actor,
                               const std::string& timestamp) {
  auto missing = missing_surveys(s);
  if (s.state != SessionState::responses_submitted || !missing.empty())
    throw IllegalTransition("cannot score in state " +
                            (s.state ? to_string(*s.state) : std::string("<none>")) +
                            (missing.empty() ? "" : "; missing responses for '" + missing.front() + "'"));
  auto card = score_session(s.id, pack, *s.routing, s.responses, thresholds);
  return transition(s, next_event(s, EventKind::scored, actor,
                                  {{"score_card", to_json(card)},
                                   {"inputs_digest", inputs_digest(s)},
                                   {"config", {{"thresholds", to_json(thresholds)}}}},
                                  timestamp));
}

inline AssessmentSession open_review(const AssessmentSession& s, const Actor& actor,
                                     const std::string& timestamp) {
  return transition(s, next_event(s, EventKind::review_opened, actor, nlohmann::json::object(), timestamp));
}

inline AssessmentSession record_framing(const AssessmentSession& s,
                                        const std::vector<FramingInput>& inputs,
                                        const Actor& actor, const std::string& timestamp) {
  if (s.state != SessionState::under_review && s.state != SessionState::framed)
    throw IllegalTransition("cannot record framing in state " +
                            (s.state ? to_string(*s.state) : std::string("<none>")));
  auto decisions = nlohmann::json::array();
  for (const auto& in : inputs) {
    FramingDecision d;
    d.principle = in.principle;
    if (s.score_card) {
      auto it = s.score_card->suggested_levels.find(in.principle);
      if (it != s.score_card->suggested_levels.end()) d.suggested_level = it->second;
    }
    d.final_level = in.final_level;
    d.rationale = in.rationale;
    d.evaluator = actor.id;
    d.timestamp = timestamp;
    decisions.push_back(to_json(d));
  }
  return transition(s, next_event(s, EventKind::framed, actor, {{"decisions", decisions}}, timestamp));
}

// The deliverable digest, when given, lets a recipient tie the document
// they hold to this point in the log.
inline AssessmentSession issue_report(const AssessmentSession& s, const std::string& catalog_version,
                                      const Actor& actor, const std::string& timestamp,
                                      const std::string& deliverable_sha256 = "") {
  nlohmann::json payload = {{"catalog_version", catalog_version}};
  if (!deliverable_sha256.empty()) payload["deliverable_sha256"] = deliverable_sha256;
  return transition(s, next_event(s, EventKind::report_issued, actor, payload, timestamp));
}

inline AssessmentSession withdraw(const AssessmentSession& s, const std::string& reason,
                                  const Actor& actor, const std::string& timestamp) {
  return transition(s, next_event(s, EventKind::withdrawn, actor, {{"reason", reason}}, timestamp));
}

inline const std::vector<SessionEvent>& audit_trail(const AssessmentSession& s) { return s.events; }

inline nlohmann::json audit_trail_json(const AssessmentSession& s) {
  auto arr = nlohmann::json::array();
  std::string head = genesis_hash();
  for (const auto& e : s.events) {
    head = chain_hash(head, e);
    auto j = to_json(e);
    j["chain_hash"] = head;
    arr.push_back(std::move(j));
  }
  return arr;
}

inline nlohmann::json to_json(const AssessmentSession& s) {
  auto responses = nlohmann::json::object();
  for (const auto& [id, r] : s.responses) responses[id] = to_json(r);
  auto rounds = nlohmann::json::array();
  for (const auto& round : s.framing_rounds) {
    auto decisions = nlohmann::json::array();
    for (const auto& d : round.decisions) decisions.push_back(to_json(d));
    rounds.push_back({{"seq", round.seq}, {"decisions", decisions}});
  }
  return {{"id", s.id},
          {"subject", to_json(s.subject)},
          {"pack_id", s.pack_id},
          {"pack_version", s.pack_version},
          {"owner", s.owner},
          {"state", s.state ? to_string(*s.state) : ""},
          {"event_count", s.events.size()},
          {"head_seq", s.head_seq()},
          {"hash_chain_head", hash_chain_head(s.events)},
          {"responses", responses},
          {"routing", s.routing ? to_json(*s.routing) : nlohmann::json(nullptr)},
          {"score_card", s.score_card ? to_json(*s.score_card) : nlohmann::json(nullptr)},
          {"framing_rounds", rounds},
          {"catalog_version", s.catalog_version}};
}

}  // namespace eps
