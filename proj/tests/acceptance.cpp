// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <functional>
#include <iostream>

#include "eps/http_server.hpp"
#include "review_fuzz.hpp"
#include "support.hpp"

using namespace eps;
using namespace eps::testing;
using nlohmann::json;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Engine tallies, Impact Scores and AIA Scores against brute-force
// enumeration on every answer combination of every fixture AIA.
std::string scoring_oracle() {
  auto start = std::chrono::steady_clock::now();
  auto aias = fixture_aias();
  check(aias.size() >= 3, "fewer than three fixture AIAs");
  std::size_t combos = 0;
  for (const auto* s : aias) {
    auto all = enumerate_responses(*s, fixture_pack().version);
    check(all.size() <= 1000, s->id + " has more than 1000 combinations");
    auto max = oracle_max(*s, all);
    for (const auto& r : all) {
      auto expected = oracle_score(*s, r, max);
      auto got = score_aia(r, *s);
      for (const auto& [p, t] : got.tallies) {
        check(t.raw_score == expected.raw.at(p), s->id + ": raw mismatch for " + p);
        check(t.max_score == expected.max.at(p), s->id + ": max mismatch for " + p);
        check(got.impact_scores.at(p) == expected.impact.at(p), s->id + ": impact mismatch for " + p);
      }
      std::size_t evaluated = 0;
      for (const auto& [p, m] : expected.max) evaluated += m > 0;
      check(got.tallies.size() == evaluated, s->id + ": evaluated principle count differs");
      check(got.aia_score == expected.aia_score, s->id + ": AIA Score mismatch");
      ++combos;
    }
  }
  auto elapsed = seconds_since(start);
  check(elapsed < 5.0, "took " + std::to_string(elapsed) + " s");
  return std::to_string(aias.size()) + " AIAs, " + std::to_string(combos) + " combinations, " +
         std::to_string(elapsed) + " s";
}

std::string scale_endpoints() {
  // Maximal-impact selections reach exactly 1 for every evaluated principle.
  std::size_t hits = 0;
  for (const auto* s : fixture_aias()) {
    auto all = enumerate_responses(*s, fixture_pack().version);
    for (const auto& p : s->evaluated_principles()) {
      if (max_attainable(*s, p) <= 0) continue;
      bool reached = false;
      for (const auto& r : all) {
        auto got = score_aia(r, *s);
        if (got.impact_scores.count(p) && got.impact_scores.at(p) == Rational(1)) {
          reached = true;
          break;
        }
      }
      check(reached, s->id + ": no selection reaches Impact Score 1 for " + p);
      ++hits;
    }
  }
  // A single -1 answer against a max of 1.
  SurveyDefinition s;
  s.id = "edge";
  s.kind = SurveyKind::aia;
  s.version = "1";
  Question q;
  q.id = "q";
  q.kind = QuestionKind::single_choice;
  AnswerOption up, down;
  up.id = "up";
  up.deltas = {{"fairness", Rational(1)}};
  down.id = "down";
  down.deltas = {{"fairness", Rational(-1)}};
  q.options = {up, down};
  s.questions = {q};
  auto got = score_aia(ResponseSet{"edge", "1", {{"q", SingleChoice{"down"}}}}, s);
  check(got.tallies.at("fairness").max_score == Rational(1), "edge max is not 1");
  check(got.impact_scores.at("fairness") == Rational(-1), "edge impact is not -1");
  check(suggest_level(got.impact_scores.at("fairness")) == ImpactLevel::low, "-1 does not classify as low");
  return std::to_string(hits) + " principles reach 1; -1 classifies low";
}

std::string routing_exhaustive() {
  const auto& pack = fixture_pack();
  auto all = enumerate_responses(*pack.pre_assessment(), pack.version);
  check(!all.empty() && all.size() <= 12, "pre-assessment has " + std::to_string(all.size()) + " combinations");
  for (const auto& pre : all) {
    auto r = route(pre, pack);
    check(r.required_aias == oracle_route(pack, pre), "routing differs from oracle");
    auto admin = administered_set(r);
    check(std::find(admin.begin(), admin.end(), pack.troubleshoot()->id) != admin.end(),
          "troubleshoot missing from an administered set");
  }
  return std::to_string(all.size()) + " combinations, troubleshoot in all";
}

std::string matrix_completeness() {
  std::size_t rejected = 0;
  for (const auto& p : catalog_principles())
    for (auto level : all_levels()) {
      TempDir tmp;
      fs::copy(catalog_dir(), tmp / "catalog", fs::copy_options::recursive);
      auto id = cell_id(p.id, level);
      fs::remove(tmp / "catalog" / "cells" / (id + ".yaml"));
      try {
        load_catalog(tmp / "catalog");
      } catch (const IncompleteMatrix& e) {
        check(e.missing_cells() == std::vector<std::string>{id}, "wrong missing cell reported for " + id);
        ++rejected;
        continue;
      }
      throw Failure("catalog without " + id + " was accepted");
    }
  auto c = load_catalog(catalog_dir());
  std::size_t found = 0;
  for (const auto& p : catalog_principles())
    for (auto level : all_levels()) found += lookup(c, p.id, level).id == cell_id(p.id, level);
  check(found == 18, "lookup succeeded on " + std::to_string(found) + " cells");
  return std::to_string(rejected) + " incomplete catalogs rejected, 18 lookups";
}

std::string differential_recommendations() {
  const auto& c = fixture_catalog();
  auto framing = [&](const std::string& principle, ImpactLevel level) {
    std::vector<FramingDecision> out;
    for (const auto& p : catalog_principles())
      out.push_back({p.id, std::nullopt, p.id == principle ? level : ImpactLevel::low, "set", "board", "t"});
    return out;
  };
  auto section = [](const RecommendationBundle& b, const std::string& p) {
    for (const auto& s : b.sections)
      if (s.principle == p) return s;
    throw Failure("no section for " + p);
  };
  std::size_t pairs = 0;
  for (const auto& p : catalog_principles())
    for (auto a : all_levels())
      for (auto b : all_levels()) {
        if (a == b || lookup(c, p.id, a) == lookup(c, p.id, b)) continue;
        auto sa = section(assemble(framing(p.id, a), c), p.id);
        auto sb = section(assemble(framing(p.id, b), c), p.id);
        check(!(sa.doc == sb.doc), p.id + ": section unchanged between levels");
        check(sa.doc == lookup(c, p.id, a) && sb.doc == lookup(c, p.id, b), p.id + ": wrong cell assembled");
        ++pairs;
      }
  check(pairs == 36, "only " + std::to_string(pairs) + " ordered level pairs differ");
  return "6 principles x 3 levels, " + std::to_string(pairs) + " ordered pairs";
}

std::string monotonicity() {
  std::mt19937_64 rng(20240601);
  int triples = 0, attempts = 0;
  while (triples < 1000 && attempts < 100000) {
    ++attempts;
    auto s = random_aia(rng);
    auto r = random_response(s, rng);
    const auto& p = generator_principles()[rng() % generator_principles().size()];
    auto before = tally(r, s);
    if (!before.count(p)) continue;
    auto upgraded = r;
    if (!upgrade_one_option(s, upgraded, p, rng)) continue;
    auto after = tally(upgraded, s);
    auto lo = impact_score(before.at(p)), hi = impact_score(after.at(p));
    check(hi >= lo, "impact decreased after an upgrade");
    check(suggest_level(hi) >= suggest_level(lo), "suggested level decreased after an upgrade");
    ++triples;
  }
  check(triples == 1000, "generated only " + std::to_string(triples) + " triples");
  std::uniform_int_distribution<std::int64_t> num(-2000, 2000);
  for (int i = 0; i < 5000; ++i) {
    Rational a(num(rng), 1000), b(num(rng), 1000);
    if (b < a) std::swap(a, b);
    check(suggest_level(a) <= suggest_level(b), "suggest_level not monotone");
  }
  return "1000 triples, 5000 level pairs";
}

std::string mitigation_lint() {
  auto ok = load_pack(data_dir() / "lint" / "mitigation-share-0.20.json");
  check(*mitigation_share(*ok.find_survey("aia1")) == Rational(1, 5), "first fixture share is not 0.20");
  auto ok_report = validate_pack(ok);
  check(ok_report.ok() && !ok_report.has_warning("MITIGATION_SHARE"), "0.20 share did not pass cleanly");
  auto bad = load_pack(data_dir() / "lint" / "mitigation-share-0.50.json");
  check(*mitigation_share(*bad.find_survey("aia1")) == Rational(1, 2), "second fixture share is not 0.50");
  check(validate_pack(bad).has_warning("MITIGATION_SHARE"), "0.50 share did not warn");
  return "0.20 passes, 0.50 warns";
}

std::string review_soundness() {
  auto out = fuzz_review(424242, 10000);
  check(out.violations.empty(), out.violations.empty() ? "" : out.violations.front());
  check(out.issued > 0, "no sequence reached report_issued");
  return std::to_string(out.sequences) + " sequences, " + std::to_string(out.issued) + " issued, " +
         std::to_string(out.rejected) + " rejected commands";
}

std::string end_to_end() {
  auto start = std::chrono::steady_clock::now();
  auto files = [](std::initializer_list<const char*> names) {
    std::string s;
    for (auto n : names) s += " " + quote(use_case_dir() / (std::string(n) + ".json"));
    return s;
  };

  // Offline half: validate the content and score the use case with the CLI.
  auto cli = quote(cli_path());
  auto v = run_command(cli + " validate " + quote(pack_dir()) + " " + quote(catalog_dir()));
  check(v.exit_code == 0, "eps validate failed: " + v.output);
  auto a = run_command(cli + " assess --format json --pack " + quote(pack_dir()) + " --responses" +
                           files({"pre", "children", "troubleshoot"}),
                       false);
  check(a.exit_code == 0, "eps assess failed");
  auto offline = json::parse(a.output);

  // Service half, over HTTP.
  TempDir tmp;
  ServiceConfig cfg;
  cfg.data_dir = tmp.path();
  cfg.packs = {pack_dir()};
  cfg.catalogs = {catalog_dir()};
  cfg.tokens = {{"r", {"alice", Role::respondent}}, {"e", {"board", Role::evaluator}}};
  Service service(cfg, std::make_shared<FileStore>(tmp / "events"));
  HttpServer server(service);
  int port = server.bind("127.0.0.1", 0);
  server.start_background();
  httplib::Client client("127.0.0.1", port);
  auto as = [](const std::string& token) { return httplib::Headers{{"Authorization", "Bearer " + token}}; };
  auto post = [&](const std::string& path, const std::string& token, const std::string& body, int want) {
    auto res = client.Post(path, as(token), body, "application/json");
    check(res && res->status == want, "POST " + path + " -> " + (res ? std::to_string(res->status) + " " + res->body : "no response"));
    return json::parse(res->body);
  };

  auto created = post("/v1/sessions", "r",
                      R"({"subject": {"organization": "Acme Edu", "system_name": "ReadBuddy",
                          "description": "AI reading tutor for children"}, "pack_id": "br-eps"})",
                      201);
  std::string base = "/v1/sessions/" + created["session"]["id"].get<std::string>();
  auto routed = post(base + "/responses", "r", read_text(use_case_dir() / "pre.json"), 200);
  check(routed["routing"]["administered"] == json({"children", "troubleshoot"}), "unexpected routing");
  post(base + "/responses", "r", read_text(use_case_dir() / "children.json"), 200);
  post(base + "/responses", "r", read_text(use_case_dir() / "troubleshoot.json"), 200);
  auto scored = post(base + "/score", "r", "", 200)["score_card"];
  check(scored["aias"] == offline["aias"] && scored["combined"] == offline["combined"] &&
            scored["suggested_levels"] == offline["suggested_levels"],
        "service score card differs from the offline CLI");
  post(base + "/review", "e", "", 200);

  json decisions = json::array();
  for (const auto& p : catalog_principles()) {
    json d = {{"principle", p.id}};
    if (scored["suggested_levels"].contains(p.id)) {
      d["final_level"] = scored["suggested_levels"][p.id];
    } else {
      d["final_level"] = "low";
      d["rationale"] = "Not assessed by the children AIA; the board sees low exposure.";
    }
    if (p.id == "privacy") {
      d["final_level"] = "high";
      d["rationale"] = "Data from minors warrants the strictest controls.";
    }
    decisions.push_back(d);
  }
  post(base + "/framing", "e", json{{"decisions", decisions}}.dump(), 200);
  auto issued = post(base + "/report", "e", "", 201)["deliverable"];

  auto fetched = client.Get(base + "/report", as("r"));
  check(fetched && fetched->status == 200, "GET report failed");
  check(json::parse(fetched->body) == issued, "fetched report differs from issued one");
  httplib::Headers md_headers = as("e");
  md_headers.emplace("Accept", "text/markdown");
  auto md = client.Get(base + "/report", md_headers);
  check(md && md->status == 200, "markdown report failed");
  server.stop();

  auto d = deliverable_from_json(issued);
  check(to_json(d) == issued, "deliverable JSON does not round-trip");
  check(deliverable_from_json(json::parse(render(d, ReportFormat::json))) == d, "rendered JSON does not round-trip");
  check(!d.aia_tables.empty() && !d.aia_tables[0].tallies.empty(), "no per-AIA tables");
  check(d.framing.size() == 6, "framing table has " + std::to_string(d.framing.size()) + " rows");
  std::size_t overrides = 0;
  for (const auto& row : d.framing)
    if (row.is_override) {
      ++overrides;
      check(row.principle == "privacy" && row.rationale_present, "unexpected override row");
    }
  check(overrides == 1, std::to_string(overrides) + " overrides marked");
  check(d.bundle.sections.size() == 6, std::to_string(d.bundle.sections.size()) + " sections");
  for (const auto& s : d.bundle.sections)
    check(!s.doc.why.what_is.empty() && !s.doc.why.why_care.empty() && !s.doc.should.empty() && !s.doc.how.empty(),
          s.principle + " section lacks WHY, SHOULD or HOW");
  for (auto heading : {"#### WHY", "#### SHOULD", "#### HOW"}) {
    std::size_t n = 0;
    for (auto pos = md->body.find(heading); pos != std::string::npos; pos = md->body.find(heading, pos + 1)) ++n;
    check(n == 6, std::string(heading) + " appears " + std::to_string(n) + " times");
  }
  check(md->body.find("OVERRIDE") != std::string::npos, "markdown does not mark the override");

  auto elapsed = seconds_since(start);
  check(elapsed < 10.0, "took " + std::to_string(elapsed) + " s");
  return "6 framing rows, 1 override, 6 sections, " + std::to_string(elapsed) + " s";
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, std::function<std::string()>>> criteria = {
      {"scoring-oracle-equivalence", scoring_oracle},
      {"scale-endpoints", scale_endpoints},
      {"routing-exhaustiveness", routing_exhaustive},
      {"matrix-completeness", matrix_completeness},
      {"differential-recommendations", differential_recommendations},
      {"monotonicity", monotonicity},
      {"mitigation-share-lint", mitigation_lint},
      {"review-soundness", review_soundness},
      {"end-to-end-use-case", end_to_end},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    try {
      std::cout << "PASS " << name << " (" << run() << ")" << std::endl;
    } catch (const std::exception& e) {
      ++failed;
      std::cout << "FAIL " << name << ": " << e.what() << std::endl;
    }
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
