#include <gtest/gtest.h>

#include "support.hpp"

using namespace eps;
using namespace eps::testing;

namespace {

const Actor kAlice{"alice", Role::respondent};
const Actor kBoard{"board", Role::evaluator};

std::vector<FramingInput> confirm_all(const AssessmentSession& s) {
  std::vector<FramingInput> out;
  for (const auto& p : framing_scope(s)) {
    auto it = s.score_card->suggested_levels.find(p);
    if (it != s.score_card->suggested_levels.end())
      out.push_back({p, it->second, ""});
    else
      out.push_back({p, ImpactLevel::low, "not assessed by any routed AIA"});
  }
  return out;
}

AssessmentSession framed_session(const ResponseSet& pre, const std::vector<ResponseSet>& aias,
                                 const std::string& override_principle = "") {
  const auto& pack = fixture_pack();
  auto s = create_session("s-report", {"Acme Edu", "ReadBuddy", "Reading tutor"}, pack, kAlice, "t1");
  s = submit_responses(s, pre, pack, kAlice, "t2");
  for (const auto& r : aias) s = submit_responses(s, r, pack, kAlice, "t3");
  s = submit_responses(s, use_case_responses("troubleshoot"), pack, kAlice, "t4");
  s = score(s, pack, Thresholds{}, kAlice, "t5");
  s = open_review(s, kBoard, "t6");
  auto inputs = confirm_all(s);
  for (auto& in : inputs)
    if (in.principle == override_principle) {
      in.final_level = ImpactLevel::high;
      in.rationale = "Children's data | needs\nthe strictest controls.";
    }
  return record_framing(s, inputs, kBoard, "t7");
}

AssessmentSession use_case() {
  return framed_session(use_case_responses("pre"), {use_case_responses("children")}, "privacy");
}

}  // namespace

TEST(Report, UseCaseDeliverable) {
  auto s = use_case();
  auto d = build_deliverable(s, fixture_catalog(), fixture_pack(), "2024-06-01T12:00:00Z");
  EXPECT_EQ(d.session_id, "s-report");
  EXPECT_EQ(d.catalog_version, "2024.1");
  ASSERT_EQ(d.aia_tables.size(), 1u);
  EXPECT_EQ(d.aia_tables[0].aia_id, "children");
  ASSERT_EQ(d.framing.size(), 6u);
  int overrides = 0;
  for (const auto& f : d.framing) overrides += f.is_override;
  EXPECT_EQ(overrides, 1);
  EXPECT_EQ(d.bundle.sections.size(), 6u);
  EXPECT_TRUE(d.bundle.unmatched.empty());
  EXPECT_EQ(d.bundle.sections[0].principle, "privacy");
  EXPECT_EQ(d.bundle.sections[0].level, ImpactLevel::high);
  EXPECT_EQ(d.evidence.size(), 2u);
  EXPECT_EQ(d.audit.event_count, s.events.size());
  EXPECT_EQ(d.audit.hash_chain_head, hash_chain_head(s.events));
}

TEST(Report, JsonRoundTripIsLossless) {
  auto d = build_deliverable(use_case(), fixture_catalog(), fixture_pack(), "2024-06-01T12:00:00Z");
  auto text = render(d, ReportFormat::json);
  auto back = deliverable_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(back, d);
  EXPECT_EQ(render(back, ReportFormat::json), text);
}

TEST(Report, MarkdownHasTablesFramingAndWhyShouldHow) {
  auto d = build_deliverable(use_case(), fixture_catalog(), fixture_pack(), "2024-06-01T12:00:00Z");
  auto md = render(d, "markdown");
  auto count = [&](const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = md.find(needle); pos != std::string::npos; pos = md.find(needle, pos + 1)) ++n;
    return n;
  };
  EXPECT_EQ(count("| Principle | Score | Max Score | Impact Score |"), 1u);
  EXPECT_NE(md.find("AIA Score: 0.275"), std::string::npos);
  EXPECT_NE(md.find("| privacy | 0.25 | 2 | 0.125 |"), std::string::npos);
  EXPECT_EQ(count("| Principle | Suggested | Final | Override | Rationale |"), 1u);
  EXPECT_EQ(count("OVERRIDE"), 1u);
  EXPECT_NE(md.find("| privacy | low | high | OVERRIDE | Children's data   needs the strictest controls. |"),
            std::string::npos);
  EXPECT_EQ(count("#### WHY"), 6u);
  EXPECT_EQ(count("#### SHOULD"), 6u);
  EXPECT_EQ(count("#### HOW"), 6u);
  EXPECT_NE(md.find("Parents may use progress reports"), std::string::npos);
  EXPECT_NE(md.find(d.audit.hash_chain_head), std::string::npos);
}

TEST(Report, ScoresRenderAsExactDecimals) {
  ResponseSet pre{"pre", "1.0.0",
                  {{"pii", SingleChoice{"yes"}}, {"audience", SingleChoice{"internal"}},
                   {"automated_decisions", SingleChoice{"no"}}}};
  const auto& privacy = *fixture_pack().find_survey("privacy");
  // Find a privacy response whose AIA score repeats in decimal.
  for (const auto& r : enumerate_responses(privacy, fixture_pack().version)) {
    auto a = score_aia(r, privacy);
    auto text = to_decimal_string(a.aia_score);
    if (text.find('(') == std::string::npos) continue;
    auto s = framed_session(pre, {r});
    auto d = build_deliverable(s, fixture_catalog(), fixture_pack(), "t");
    auto md = render(d, ReportFormat::human_readable);
    EXPECT_NE(md.find("AIA Score: " + text), std::string::npos) << text;
    auto j = nlohmann::json::parse(render(d, ReportFormat::json));
    EXPECT_EQ(j["aia_tables"][0]["aia_score"]["decimal"], text);
    EXPECT_EQ(rational_from_json(j["aia_tables"][0]["aia_score"]), a.aia_score);
    return;
  }
  FAIL() << "no repeating-decimal AIA score in the privacy fixture";
}

TEST(Report, NonCatalogPrincipleLandsInAppendix) {
  ResponseSet pre{"pre", "1.0.0",
                  {{"pii", SingleChoice{"yes"}}, {"audience", SingleChoice{"internal"}},
                   {"automated_decisions", SingleChoice{"no"}}}};
  auto r = enumerate_responses(*fixture_pack().find_survey("privacy"), fixture_pack().version).front();
  auto d = build_deliverable(framed_session(pre, {r}), fixture_catalog(), fixture_pack(), "t");
  EXPECT_EQ(d.framing.size(), 7u);
  ASSERT_EQ(d.bundle.unmatched.size(), 1u);
  EXPECT_EQ(d.bundle.unmatched[0].principle, "accountability");
  EXPECT_TRUE(d.bundle.unmatched[0].score);
  EXPECT_NE(render(d, "md").find("## Appendix: unmatched principles"), std::string::npos);
}

TEST(Report, ZeroAiaSessionStillProducesAReport) {
  ResponseSet pre{"pre", "1.0.0",
                  {{"pii", SingleChoice{"no"}}, {"audience", SingleChoice{"internal"}},
                   {"automated_decisions", SingleChoice{"no"}}}};
  auto s = framed_session(pre, {});
  auto d = build_deliverable(s, fixture_catalog(), fixture_pack(), "t");
  EXPECT_TRUE(d.aia_tables.empty());
  EXPECT_EQ(d.framing.size(), 6u);
  for (const auto& f : d.framing) {
    EXPECT_FALSE(f.suggested_level);
    EXPECT_TRUE(f.rationale_present);
  }
  auto md = render(d, "markdown");
  EXPECT_NE(md.find("No AIA was scored"), std::string::npos);
  EXPECT_NE(md.find("board judgment"), std::string::npos);
  EXPECT_EQ(deliverable_from_json(nlohmann::json::parse(render(d, "json"))), d);
}

TEST(Report, RequiresFramedSession) {
  auto s = use_case();
  auto issued = issue_report(s, "2024.1", kBoard, "t8");
  EXPECT_THROW(build_deliverable(issued, fixture_catalog(), fixture_pack(), "t"), StateError);
  auto under_review = fold({s.events.begin(), s.events.end() - 1});
  EXPECT_THROW(build_deliverable(under_review, fixture_catalog(), fixture_pack(), "t"), StateError);
}

TEST(Report, UnsupportedFormat) {
  auto d = build_deliverable(use_case(), fixture_catalog(), fixture_pack(), "t");
  EXPECT_THROW(render(d, "pdf"), UnsupportedFormat);
}

TEST(Report, RebuildIsDeterministic) {
  auto s = use_case();
  auto a = render(build_deliverable(s, fixture_catalog(), fixture_pack(), "t"), ReportFormat::json);
  auto b = render(build_deliverable(fold(s.events), fixture_catalog(), fixture_pack(), "t"), ReportFormat::json);
  EXPECT_EQ(a, b);
}
