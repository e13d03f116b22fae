#pragma once

// Shared fixtures and independent oracles for the test binaries.

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "eps/eps.hpp"

namespace eps::testing {

namespace fs = std::filesystem;

inline fs::path data_dir() { return EPS_DATA_DIR; }
inline fs::path pack_dir() { return data_dir() / "packs" / "br"; }
inline fs::path catalog_dir() { return data_dir() / "catalog"; }
inline fs::path use_case_dir() { return data_dir() / "use_case"; }
inline std::string cli_path() { return EPS_CLI_PATH; }

inline const SurveyPack& fixture_pack() {
  static const SurveyPack pack = load_pack(pack_dir());
  return pack;
}

inline const Catalog& fixture_catalog() {
  static const Catalog catalog = load_catalog(catalog_dir());
  return catalog;
}

inline ResponseSet use_case_responses(const std::string& name) {
  return response_set_from_json(nlohmann::json::parse(yaml::read_file(use_case_dir() / (name + ".json"))));
}

inline std::string read_text(const fs::path& p) { return yaml::read_file(p); }

inline void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "eps") {
    static std::mt19937_64 rng{std::random_device{}()};
    path_ = fs::temp_directory_path() / (tag + "-" + std::to_string(rng()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout, plus stderr when merged
};

inline CommandResult run_command(const std::string& command, bool merge_stderr = true) {
  CommandResult r;
  std::string full = command + (merge_stderr ? " 2>&1" : " 2>/dev/null");
  FILE* pipe = ::popen(full.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

// ---------------------------------------------------------------------------
// Brute-force oracle. Written against the raw survey data only: it never
// calls the scoring, routing or max_attainable code under test.

// Every legal selection for one question, as lists of option indices.
inline std::vector<std::vector<std::size_t>> legal_selections(const Question& q) {
  std::vector<std::vector<std::size_t>> out;
  std::size_t n = q.options.size();
  if (q.kind == QuestionKind::single_choice) {
    for (std::size_t i = 0; i < n; ++i) out.push_back({i});
  } else if (q.kind == QuestionKind::multiple_choice) {
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
      std::vector<std::size_t> pick;
      for (std::size_t i = 0; i < n; ++i)
        if (mask & (std::uint64_t{1} << i)) pick.push_back(i);
      if (pick.size() >= q.min_select && pick.size() <= q.max_select) out.push_back(pick);
    }
  } else {
    out.push_back({});
  }
  return out;
}

// Every complete, legal response set for a survey, in a fixed order.
inline std::vector<ResponseSet> enumerate_responses(const SurveyDefinition& s,
                                                    const std::string& pack_version) {
  std::vector<ResponseSet> out{ResponseSet{s.id, pack_version, {}}};
  for (const auto& q : s.questions) {
    std::vector<ResponseSet> next;
    for (const auto& base : out)
      for (const auto& pick : legal_selections(q)) {
        ResponseSet r = base;
        if (q.kind == QuestionKind::single_choice) {
          r.answers[q.id] = SingleChoice{q.options[pick[0]].id};
        } else if (q.kind == QuestionKind::multiple_choice) {
          MultiChoice m;
          for (auto i : pick) m.options.push_back(q.options[i].id);
          r.answers[q.id] = m;
        } else {
          r.answers[q.id] = FreeText{"free text for " + q.id};
        }
        next.push_back(std::move(r));
      }
    out = std::move(next);
  }
  return out;
}

inline std::vector<std::string> answer_option_ids(const Answer& a) {
  if (auto* s = std::get_if<SingleChoice>(&a)) return {s->option};
  if (auto* m = std::get_if<MultiChoice>(&a)) return m->options;
  return {};
}

// Per-principle raw sums for one response set.
inline std::map<std::string, Rational> oracle_raw(const SurveyDefinition& s, const ResponseSet& r) {
  std::map<std::string, Rational> raw;
  for (const auto& q : s.questions) {
    for (const auto& o : q.options)
      for (const auto& d : o.deltas) raw.emplace(d.principle, Rational(0));
    auto it = r.answers.find(q.id);
    if (it == r.answers.end()) continue;
    for (const auto& id : answer_option_ids(it->second))
      for (const auto& o : q.options)
        if (o.id == id)
          for (const auto& d : o.deltas) raw[d.principle] += d.delta;
  }
  return raw;
}

struct OracleAia {
  std::map<std::string, Rational> raw, max, impact;
  Rational aia_score;
};

// Max Score per principle = the largest raw sum over every legal response
// set, found by exhaustive enumeration.
inline std::map<std::string, Rational> oracle_max(const SurveyDefinition& s,
                                                  const std::vector<ResponseSet>& all) {
  std::map<std::string, Rational> best;
  bool first = true;
  for (const auto& r : all) {
    for (const auto& [p, v] : oracle_raw(s, r)) {
      if (first || !best.count(p) || v > best[p]) best[p] = v;
    }
    first = false;
  }
  return best;
}

inline OracleAia oracle_score(const SurveyDefinition& s, const ResponseSet& r,
                              const std::map<std::string, Rational>& max) {
  OracleAia out;
  out.raw = oracle_raw(s, r);
  Rational sum(0);
  std::int64_t n = 0;
  for (const auto& [p, m] : max) {
    if (!(m > Rational(0))) continue;
    out.max[p] = m;
    out.impact[p] = out.raw.at(p) / m;
    sum += out.impact[p];
    ++n;
  }
  out.aia_score = n ? sum / Rational(n) : Rational(0);
  for (auto it = out.raw.begin(); it != out.raw.end();)
    it = out.max.count(it->first) ? std::next(it) : out.raw.erase(it);
  return out;
}

// Routing oracle: the AIA ids triggered by any selected option, in pack order.
inline std::vector<std::string> oracle_route(const SurveyPack& pack, const ResponseSet& pre) {
  std::set<std::string> hit;
  const SurveyDefinition* s = nullptr;
  for (const auto& sv : pack.surveys)
    if (sv.kind == SurveyKind::pre_assessment) s = &sv;
  for (const auto& q : s->questions) {
    auto it = pre.answers.find(q.id);
    if (it == pre.answers.end()) continue;
    for (const auto& id : answer_option_ids(it->second))
      for (const auto& o : q.options)
        if (o.id == id) hit.insert(o.triggers.begin(), o.triggers.end());
  }
  std::vector<std::string> out;
  for (const auto& sv : pack.surveys)
    if (hit.count(sv.id)) out.push_back(sv.id);
  return out;
}

inline std::vector<const SurveyDefinition*> fixture_aias() {
  std::vector<const SurveyDefinition*> out;
  for (const auto& s : fixture_pack().surveys)
    if (s.kind == SurveyKind::aia) out.push_back(&s);
  return out;
}

// Small hand-written pack used by mutation and lint tests.
inline nlohmann::json tiny_pack_json() {
  return nlohmann::json::parse(R"({
    "schema_version": 1, "id": "tiny", "version": "1.0.0", "jurisdiction": "XX",
    "principles": [],
    "surveys": [
      {"id": "pre", "kind": "pre_assessment", "title": "Pre", "version": "1", "questions": [
        {"id": "gate", "prompt": "Route?", "kind": "single_choice", "options": [
          {"id": "yes", "label": "Yes", "triggers": ["aia1"]},
          {"id": "no", "label": "No"}]}]},
      {"id": "aia1", "kind": "aia", "title": "AIA", "version": "1", "questions": [
        {"id": "q1", "prompt": "Q1", "kind": "single_choice", "options": [
          {"id": "a", "label": "A", "deltas": {"fairness": "1", "privacy": "0.5", "transparency": "0.5"}},
          {"id": "b", "label": "B", "deltas": {"fairness": "-0.75"}}]},
        {"id": "q2", "prompt": "Q2", "kind": "multiple_choice", "min_select": 1, "max_select": 2,
         "options": [
          {"id": "x", "label": "X", "deltas": {"privacy": "1"}},
          {"id": "y", "label": "Y", "deltas": {"transparency": "1", "fairness": "0.5"}},
          {"id": "z", "label": "Z", "deltas": {"privacy": "0.25"}}]}]},
      {"id": "ts", "kind": "troubleshoot", "title": "Troubleshoot", "version": "1", "questions": [
        {"id": "notes", "prompt": "Notes", "kind": "open_ended"}]}]
  })");
}

// --- generators for property tests -------------------------------------------

inline const std::vector<std::string>& generator_principles() {
  static const std::vector<std::string> ids = {"fairness", "privacy", "transparency", "reliability"};
  return ids;
}

// Random AIA with single- and multiple-choice questions over four principles.
inline SurveyDefinition random_aia(std::mt19937_64& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  SurveyDefinition s;
  s.id = "gen";
  s.kind = SurveyKind::aia;
  s.version = "1";
  int nq = pick(1, 5);
  for (int qi = 0; qi < nq; ++qi) {
    Question q;
    q.id = "q" + std::to_string(qi);
    q.kind = pick(0, 2) == 0 ? QuestionKind::multiple_choice : QuestionKind::single_choice;
    int no = pick(2, 5);
    for (int oi = 0; oi < no; ++oi) {
      AnswerOption o;
      o.id = "o" + std::to_string(oi);
      for (const auto& p : generator_principles())
        if (pick(0, 2) != 0) o.deltas.push_back({p, Rational(pick(-100, 100), 100)});
      q.options.push_back(std::move(o));
    }
    if (q.kind == QuestionKind::multiple_choice) {
      q.min_select = static_cast<std::size_t>(pick(1, no));
      q.max_select = static_cast<std::size_t>(pick(static_cast<int>(q.min_select), no));
    }
    s.questions.push_back(std::move(q));
  }
  return s;
}

inline ResponseSet random_response(const SurveyDefinition& s, std::mt19937_64& rng) {
  ResponseSet r{s.id, "1", {}};
  for (const auto& q : s.questions) {
    auto choices = legal_selections(q);
    const auto& pick = choices[std::uniform_int_distribution<std::size_t>(0, choices.size() - 1)(rng)];
    if (q.kind == QuestionKind::single_choice) {
      r.answers[q.id] = SingleChoice{q.options[pick[0]].id};
    } else {
      MultiChoice m;
      for (auto i : pick) m.options.push_back(q.options[i].id);
      r.answers[q.id] = m;
    }
  }
  return r;
}

// Replaces one selected option by an unselected one whose delta on
// `principle` is at least as large. Returns false when no such swap exists.
inline bool upgrade_one_option(const SurveyDefinition& s, ResponseSet& r, const std::string& principle,
                               std::mt19937_64& rng) {
  struct Swap {
    std::string question;
    std::string from, to;
  };
  std::vector<Swap> swaps;
  for (const auto& q : s.questions) {
    auto chosen = answer_option_ids(r.answers.at(q.id));
    std::set<std::string> in(chosen.begin(), chosen.end());
    for (const auto& from : chosen)
      for (const auto& to : q.options)
        if (!in.count(to.id) && to.delta_for(principle) >= q.find_option(from)->delta_for(principle))
          swaps.push_back({q.id, from, to.id});
  }
  if (swaps.empty()) return false;
  const auto& sw = swaps[std::uniform_int_distribution<std::size_t>(0, swaps.size() - 1)(rng)];
  auto& a = r.answers.at(sw.question);
  if (auto* single = std::get_if<SingleChoice>(&a)) {
    single->option = sw.to;
  } else {
    auto& opts = std::get<MultiChoice>(a).options;
    std::replace(opts.begin(), opts.end(), sw.from, sw.to);
  }
  return true;
}

}  // namespace eps::testing
