#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eps/assessment_flow.hpp"
#include "eps/errors.hpp"
#include "eps/recommendation.hpp"
#include "eps/review.hpp"
#include "eps/scoring.hpp"
#include "eps/survey_model.hpp"

namespace eps {

inline constexpr int kDeliverableSchemaVersion = 1;

struct FramingRow {
  std::string principle;
  std::optional<ImpactLevel> suggested_level;
  ImpactLevel final_level = ImpactLevel::low;
  std::string rationale;
  bool is_override = false;
  bool rationale_present = false;
  friend bool operator==(const FramingRow&, const FramingRow&) = default;
};

// Verbatim open-ended answer from a qualitative survey.
struct EvidenceItem {
  std::string survey;
  std::string question;
  std::string prompt;
  std::string answer;
  friend bool operator==(const EvidenceItem&, const EvidenceItem&) = default;
};

struct AuditDigest {
  std::size_t event_count = 0;
  std::string hash_chain_head;
  friend bool operator==(const AuditDigest&, const AuditDigest&) = default;
};

struct Deliverable {
  int schema_version = kDeliverableSchemaVersion;
  std::string session_id;
  std::string pack_id;
  std::string pack_version;
  std::string catalog_version;
  Subject subject;
  RoutingResult routing;
  std::vector<AiaResult> aia_tables;
  ScoreMap combined;
  std::vector<FramingRow> framing;  // by principle id
  RecommendationBundle bundle;
  std::vector<EvidenceItem> evidence;
  AuditDigest audit;
  std::string issued_at;
  friend bool operator==(const Deliverable&, const Deliverable&) = default;
};

inline Deliverable build_deliverable(const AssessmentSession& session, const ScoreCard& score_card,
                                     const std::vector<FramingDecision>& framing,
                                     const RecommendationBundle& bundle, const SurveyPack& pack,
                                     const std::string& issued_at) {
  if (session.state != SessionState::framed)
    throw StateError("deliverable requires a framed session (state is " +
                     (session.state ? to_string(*session.state) : std::string("<none>")) + ")");
  Deliverable d;
  d.session_id = session.id;
  d.pack_id = session.pack_id;
  d.pack_version = session.pack_version;
  d.catalog_version = bundle.catalog_version;
  d.subject = session.subject;
  if (session.routing) d.routing = *session.routing;
  d.aia_tables = score_card.aias;
  d.combined = score_card.combined;
  for (const auto& f : framing)
    d.framing.push_back({f.principle, f.suggested_level, f.final_level, f.rationale, f.is_override(),
                         !f.rationale.empty()});
  std::sort(d.framing.begin(), d.framing.end(),
            [](const FramingRow& a, const FramingRow& b) { return a.principle < b.principle; });
  for (std::size_t i = 1; i < d.framing.size(); ++i)
    if (d.framing[i].principle == d.framing[i - 1].principle)
      throw IncompleteFraming("principle '" + d.framing[i].principle + "' framed twice");
  d.bundle = bundle;

  if (const SurveyDefinition* ts = pack.find_survey(session.troubleshoot_id)) {
    auto it = session.responses.find(ts->id);
    if (it != session.responses.end())
      for (const auto& q : ts->questions) {
        auto a = it->second.answers.find(q.id);
        if (a == it->second.answers.end()) continue;
        if (const auto* text = std::get_if<FreeText>(&a->second))
          d.evidence.push_back({ts->id, q.id, q.prompt, text->text});
      }
  }
  d.audit = {session.events.size(), hash_chain_head(session.events)};
  d.issued_at = issued_at;
  return d;
}

// Convenience: builds from the session's own score card and latest framing.
inline Deliverable build_deliverable(const AssessmentSession& session, const Catalog& catalog,
                                     const SurveyPack& pack, const std::string& issued_at) {
  if (session.state != SessionState::framed || !session.current_framing())
    throw StateError("deliverable requires a framed session");
  ScoreCard card = session.score_card.value_or(ScoreCard{});
  const auto& framing = session.current_framing()->decisions;
  return build_deliverable(session, card, framing, assemble(framing, catalog, card.combined), pack,
                           issued_at);
}

inline nlohmann::json to_json(const Deliverable& d) {
  auto tables = nlohmann::json::array();
  for (const auto& a : d.aia_tables) {
    ScoreCard one;
    one.aias = {a};
    tables.push_back(to_json(one)["aias"][0]);
  }
  auto combined = nlohmann::json::object();
  for (const auto& [p, s] : d.combined) combined[p] = rational_to_json(s);
  auto framing = nlohmann::json::array();
  for (const auto& f : d.framing)
    framing.push_back(
        {{"principle", f.principle},
         {"suggested_level", f.suggested_level ? nlohmann::json(to_string(*f.suggested_level)) : nlohmann::json(nullptr)},
         {"final_level", to_string(f.final_level)},
         {"rationale", f.rationale},
         {"override", f.is_override},
         {"rationale_present", f.rationale_present}});
  auto evidence = nlohmann::json::array();
  for (const auto& e : d.evidence)
    evidence.push_back({{"survey", e.survey}, {"question", e.question}, {"prompt", e.prompt}, {"answer", e.answer}});
  return {{"schema_version", d.schema_version},
          {"session_id", d.session_id},
          {"pack_id", d.pack_id},
          {"pack_version", d.pack_version},
          {"catalog_version", d.catalog_version},
          {"subject", to_json(d.subject)},
          {"routing", to_json(d.routing)},
          {"aia_tables", tables},
          {"combined", combined},
          {"framing", framing},
          {"recommendations", to_json(d.bundle)},
          {"evidence", evidence},
          {"audit", {{"event_count", d.audit.event_count}, {"hash_chain_head", d.audit.hash_chain_head}}},
          {"issued_at", d.issued_at}};
}

inline Deliverable deliverable_from_json(const nlohmann::json& j) {
  Deliverable d;
  d.schema_version = j.at("schema_version").get<int>();
  if (d.schema_version != kDeliverableSchemaVersion) throw SchemaError("unsupported deliverable schema_version");
  d.session_id = j.at("session_id").get<std::string>();
  d.pack_id = j.at("pack_id").get<std::string>();
  d.pack_version = j.at("pack_version").get<std::string>();
  d.catalog_version = j.at("catalog_version").get<std::string>();
  d.subject = subject_from_json(j.at("subject"));
  d.routing = routing_from_json(j.at("routing"));
  nlohmann::json card = {{"session_id", ""}, {"pack_id", ""}, {"pack_version", ""},
                         {"thresholds", to_json(Thresholds{})}, {"aias", j.at("aia_tables")},
                         {"combined", j.at("combined")}, {"suggested_levels", nlohmann::json::object()}};
  auto parsed = score_card_from_json(card);
  d.aia_tables = parsed.aias;
  d.combined = parsed.combined;
  for (const auto& f : j.at("framing")) {
    FramingRow row;
    row.principle = f.at("principle").get<std::string>();
    if (!f.at("suggested_level").is_null()) row.suggested_level = level_from_json(f.at("suggested_level"));
    row.final_level = level_from_json(f.at("final_level"));
    row.rationale = f.at("rationale").get<std::string>();
    row.is_override = f.at("override").get<bool>();
    row.rationale_present = f.at("rationale_present").get<bool>();
    d.framing.push_back(std::move(row));
  }
  d.bundle = bundle_from_json(j.at("recommendations"));
  for (const auto& e : j.at("evidence"))
    d.evidence.push_back({e.at("survey").get<std::string>(), e.at("question").get<std::string>(),
                          e.at("prompt").get<std::string>(), e.at("answer").get<std::string>()});
  d.audit = {j.at("audit").at("event_count").get<std::size_t>(),
             j.at("audit").at("hash_chain_head").get<std::string>()};
  d.issued_at = j.at("issued_at").get<std::string>();
  return d;
}

namespace detail {

inline std::string title_case(const std::string& id) {
  for (const auto& p : catalog_principles())
    if (p.id == id) return p.display_name;
  std::string out = id;
  if (!out.empty() && out[0] >= 'a' && out[0] <= 'z') out[0] = static_cast<char>(out[0] - 'a' + 'A');
  return out;
}

inline std::string cell(std::string text) {
  for (auto& c : text)
    if (c == '\n' || c == '|') c = ' ';
  return text;
}

inline std::string render_markdown(const Deliverable& d) {
  std::ostringstream out;
  out << "# Ethical impact assessment: " << d.subject.system_name << "\n\n";
  out << "- Organization: " << d.subject.organization << "\n";
  if (!d.subject.description.empty()) out << "- System: " << d.subject.description << "\n";
  out << "- Session: " << d.session_id << "\n";
  out << "- Survey pack: " << d.pack_id << " @ " << d.pack_version << "\n";
  out << "- Recommendation catalog: " << d.catalog_version << "\n";
  out << "- Issued: " << d.issued_at << "\n";
  out << "- Format version: " << d.schema_version << "\n\n";

  out << "## Routing\n\n";
  if (d.routing.required_aias.empty()) {
    out << "No impact assessment survey was required.\n";
  } else {
    for (const auto& aia : d.routing.required_aias) {
      out << "- " << aia << " (triggered by";
      for (const auto& src : d.routing.rationale.at(aia)) out << " " << src.question << "=" << src.option;
      out << ")\n";
    }
  }
  out << "- " << d.routing.troubleshoot << " (always administered)\n\n";

  out << "## Impact scores\n\n";
  if (d.aia_tables.empty()) out << "No AIA was scored; framing rests on board judgment.\n\n";
  for (const auto& a : d.aia_tables) {
    out << "### AIA: " << a.aia_id << "\n\n";
    out << "| Principle | Score | Max Score | Impact Score |\n|---|---|---|---|\n";
    for (const auto& [p, t] : a.tallies)
      out << "| " << p << " | " << to_decimal_string(t.raw_score) << " | " << to_decimal_string(t.max_score)
          << " | " << to_decimal_string(a.impact_scores.at(p)) << " |\n";
    out << "\nAIA Score: " << to_decimal_string(a.aia_score) << " (over " << a.tallies.size()
        << " evaluated principles)\n\n";
  }
  if (!d.combined.empty()) {
    out << "### Combined principle scores\n\n| Principle | Combined Impact Score |\n|---|---|\n";
    for (const auto& [p, s] : d.combined) out << "| " << p << " | " << to_decimal_string(s) << " |\n";
    out << "\n";
  }

  out << "## Ethical framing\n\n";
  out << "| Principle | Suggested | Final | Override | Rationale |\n|---|---|---|---|---|\n";
  for (const auto& f : d.framing)
    out << "| " << f.principle << " | " << (f.suggested_level ? to_string(*f.suggested_level) : "-") << " | "
        << to_string(f.final_level) << " | "
        << (f.is_override ? "OVERRIDE" : (f.suggested_level ? "confirmed" : "board judgment")) << " | "
        << cell(f.rationale) << " |\n";
  out << "\n";

  out << "## Recommendations\n\n";
  for (const auto& s : d.bundle.sections) {
    const auto& doc = s.doc;
    out << "### " << title_case(s.principle) << " (" << to_string(s.level) << " impact)\n\n";
    if (!doc.summary.empty()) out << doc.summary << "\n\n";
    out << "#### WHY\n\n";
    if (!doc.why.what_is.empty()) out << "**What is it?** " << doc.why.what_is << "\n\n";
    if (!doc.why.why_care.empty()) out << "**Why should you care?** " << doc.why.why_care << "\n\n";
    for (const auto& c : doc.why.deficit_cases)
      out << "- " << c.title << (c.summary.empty() ? "" : ": " + c.summary) << "\n";
    if (!doc.why.deficit_cases.empty()) out << "\n";
    out << "#### SHOULD\n\n";
    for (std::size_t i = 0; i < doc.should.size(); ++i)
      out << i + 1 << ". " << doc.should[i].statement << " (verify: " << doc.should[i].verification << ")\n";
    out << "\n#### HOW\n\n";
    for (std::size_t i = 0; i < doc.how.size(); ++i) {
      const auto& p = doc.how[i];
      out << i + 1 << ". " << p.instruction << "\n";
      for (const auto& t : p.tools)
        out << "   - Tool: [" << t.title << "](" << t.url << ")" << (t.note.empty() ? "" : ": " + t.note) << "\n";
      for (const auto& l : p.links) out << "   - See: [" << l.title << "](" << l.url << ")\n";
    }
    out << "\n";
  }

  if (!d.bundle.unmatched.empty()) {
    out << "## Appendix: unmatched principles\n\n";
    out << "Scored principles without catalog recommendations.\n\n";
    out << "| Principle | Score | Suggested | Final | Rationale |\n|---|---|---|---|---|\n";
    for (const auto& u : d.bundle.unmatched)
      out << "| " << u.principle << " | " << (u.score ? to_decimal_string(*u.score) : "-") << " | "
          << (u.suggested_level ? to_string(*u.suggested_level) : "-") << " | " << to_string(u.final_level)
          << " | " << cell(u.rationale) << " |\n";
    out << "\n";
  }

  if (!d.evidence.empty()) {
    out << "## Appendix: qualitative evidence\n\n";
    for (const auto& e : d.evidence) out << "**" << e.prompt << "**\n\n> " << cell(e.answer) << "\n\n";
  }

  out << "## Audit\n\n";
  out << "- Events: " << d.audit.event_count << "\n";
  out << "- Hash chain head: `" << d.audit.hash_chain_head << "`\n";
  return out.str();
}

}  // namespace detail

enum class ReportFormat { json, human_readable };

inline ReportFormat report_format_from_string(const std::string& s) {
  if (s == "json") return ReportFormat::json;
  if (s == "human_readable" || s == "markdown" || s == "md") return ReportFormat::human_readable;
  throw UnsupportedFormat("unsupported report format '" + s + "'");
}

inline std::string render(const Deliverable& d, ReportFormat format) {
  if (format == ReportFormat::json) return canonical_dump(to_json(d));
  return detail::render_markdown(d);
}

inline std::string render(const Deliverable& d, const std::string& format) {
  return render(d, report_format_from_string(format));
}

}  // namespace eps
