#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "eps/errors.hpp"
#include "eps/json_reader.hpp"
#include "eps/rational.hpp"
#include "eps/review.hpp"
#include "eps/scoring.hpp"
#include "eps/survey_model.hpp"
#include "eps/validation.hpp"
#include "eps/yaml_json.hpp"

namespace eps {

inline constexpr int kCatalogSchemaVersion = 1;

struct DeficitCase {
  std::string title;
  std::string summary;
  friend bool operator==(const DeficitCase&, const DeficitCase&) = default;
};

// WHY: what the principle is, why it matters, and cases where it failed.
struct WhySection {
  std::string what_is;
  std::string why_care;
  std::vector<DeficitCase> deficit_cases;
  friend bool operator==(const WhySection&, const WhySection&) = default;
};

// SHOULD: one normative criterion and how compliance is checked.
struct Criterion {
  std::string statement;
  std::string verification;
  friend bool operator==(const Criterion&, const Criterion&) = default;
};

struct ToolRef {
  std::string title;
  std::string url;
  std::string note;
  friend bool operator==(const ToolRef&, const ToolRef&) = default;
};

struct Link {
  std::string title;
  std::string url;
  friend bool operator==(const Link&, const Link&) = default;
};

// HOW: an instruction plus the external tools and material it points to.
struct Practice {
  std::string instruction;
  std::vector<ToolRef> tools;
  std::vector<Link> links;
  friend bool operator==(const Practice&, const Practice&) = default;
};

struct RecommendationDoc {
  std::string id;  // "<principle>-<level>"
  std::string principle;
  ImpactLevel level = ImpactLevel::low;
  std::string summary;
  WhySection why;
  std::vector<Criterion> should;
  std::vector<Practice> how;
  friend bool operator==(const RecommendationDoc&, const RecommendationDoc&) = default;
};

inline std::string cell_id(const std::string& principle, ImpactLevel level) {
  return principle + "-" + to_string(level);
}

struct Catalog {
  std::string version;
  std::map<std::pair<std::string, ImpactLevel>, RecommendationDoc> docs;
  ValidationReport lints;  // warnings only

  friend bool operator==(const Catalog& a, const Catalog& b) {
    return a.version == b.version && a.docs == b.docs;
  }
};

// ---------------------------------------------------------------------------
// Reading

namespace detail {

inline std::vector<DeficitCase> read_cases(ObjectReader& r, const std::string& key) {
  std::vector<DeficitCase> out;
  const auto& arr = r.array_or_empty(key);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    ObjectReader c(arr[i], indexed(r.child(key), i));
    out.push_back({c.str("title"), c.str_or("summary", "")});
    c.finish();
  }
  return out;
}

inline WhySection read_why(const nlohmann::json& j, const std::string& path) {
  ObjectReader r(j, path);
  WhySection w;
  r.has("principle");  // informative in authoring files
  w.what_is = r.str_or("what_is", "");
  w.why_care = r.str_or("why_care", "");
  w.deficit_cases = read_cases(r, "deficit_cases");
  r.finish();
  return w;
}

inline Practice read_practice(const nlohmann::json& j, const std::string& path) {
  ObjectReader r(j, path);
  Practice p;
  p.instruction = r.str("instruction");
  const auto& tools = r.array_or_empty("tools");
  for (std::size_t i = 0; i < tools.size(); ++i) {
    ObjectReader t(tools[i], indexed(r.child("tools"), i));
    p.tools.push_back({t.str("title"), t.str("url"), t.str_or("note", "")});
    t.finish();
  }
  const auto& links = r.array_or_empty("links");
  for (std::size_t i = 0; i < links.size(); ++i) {
    ObjectReader l(links[i], indexed(r.child("links"), i));
    p.links.push_back({l.str("title"), l.str("url")});
    l.finish();
  }
  r.finish();
  return p;
}

// A cell document; level-specific deficit cases are appended to the WHY.
inline RecommendationDoc read_cell(const nlohmann::json& j, const std::string& path,
                                   const std::map<std::string, WhySection>& why) {
  ObjectReader r(j, path);
  RecommendationDoc d;
  d.principle = r.str("principle");
  auto level = impact_level_from_string(r.str("level"));
  if (!level) throw SchemaError(r.child("level") + ": expected low, intermediate or high");
  d.level = *level;
  d.id = cell_id(d.principle, d.level);
  if (!is_catalog_principle(d.principle))
    throw SchemaError(path + ": '" + d.principle + "' is not one of the six catalog principles");
  auto w = why.find(d.principle);
  if (w == why.end()) throw SchemaError(path + ": no WHY document for '" + d.principle + "'");
  d.why = w->second;
  for (auto& c : read_cases(r, "deficit_cases")) d.why.deficit_cases.push_back(std::move(c));
  d.summary = r.str_or("summary", "");
  const auto& should = r.array("should");
  for (std::size_t i = 0; i < should.size(); ++i) {
    ObjectReader c(should[i], indexed(r.child("should"), i));
    d.should.push_back({c.str("statement"), c.str("verification")});
    c.finish();
  }
  const auto& how = r.array("how");
  for (std::size_t i = 0; i < how.size(); ++i)
    d.how.push_back(read_practice(how[i], indexed(r.child("how"), i)));
  r.finish();
  if (d.should.empty()) throw SchemaError(path + ": SHOULD section is empty");
  if (d.how.empty()) throw SchemaError(path + ": HOW section is empty");
  if (d.why.what_is.empty() && d.why.why_care.empty() && d.why.deficit_cases.empty())
    throw SchemaError(path + ": WHY section is empty");
  return d;
}

inline void lint_catalog(Catalog& c) {
  for (const auto& p : catalog_principles()) {
    auto count = [&](ImpactLevel l) { return c.docs.at({p.id, l}).should.size(); };
    auto low = count(ImpactLevel::low), mid = count(ImpactLevel::intermediate),
         high = count(ImpactLevel::high);
    if (!(high >= mid && mid >= low))
      c.lints.warn("MONOTONE_COVERAGE", "principle:" + p.id,
                   "SHOULD counts low/intermediate/high = " + std::to_string(low) + "/" +
                       std::to_string(mid) + "/" + std::to_string(high) +
                       "; higher impact should carry at least as many criteria");
    const auto& why = c.docs.at({p.id, ImpactLevel::low}).why;
    if (why.what_is.empty() || why.why_care.empty())
      c.lints.warn("WHY_CHECKLIST", "principle:" + p.id,
                   "WHY should answer both 'what is it' and 'why care'");
  }
}

inline Catalog finish_catalog(std::string version, std::vector<RecommendationDoc> docs) {
  Catalog c;
  c.version = std::move(version);
  for (auto& d : docs) {
    auto key = std::make_pair(d.principle, d.level);
    if (c.docs.count(key)) throw SchemaError("duplicate catalog cell '" + d.id + "'");
    c.docs.emplace(key, std::move(d));
  }
  std::vector<std::string> missing;
  for (const auto& p : catalog_principles())
    for (auto l : all_levels())
      if (!c.docs.count({p.id, l})) missing.push_back(cell_id(p.id, l));
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw IncompleteMatrix("catalog is missing cell(s): " + list, missing);
  }
  lint_catalog(c);
  return c;
}

}  // namespace detail

// Authoring layout: catalog.yaml ({schema_version, version}), why/<principle>.yaml,
// cells/<principle>-<level>.yaml.
inline Catalog load_catalog_dir(const std::filesystem::path& dir) {
  auto manifest = yaml::parse_file(dir / "catalog.yaml");
  detail::ObjectReader m(manifest, (dir / "catalog.yaml").string());
  if (m.integer("schema_version") != kCatalogSchemaVersion)
    throw SchemaError("catalog: unsupported schema_version");
  auto version = m.str("version");
  m.finish();

  std::map<std::string, WhySection> why;
  for (const auto& p : catalog_principles()) {
    auto path = dir / "why" / (p.id + ".yaml");
    if (!std::filesystem::exists(path)) throw SchemaError(path.string() + ": missing WHY document");
    why[p.id] = detail::read_why(yaml::parse_file(path), path.string());
  }

  std::vector<RecommendationDoc> docs;
  auto cells = dir / "cells";
  if (std::filesystem::is_directory(cells)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(cells))
      if (entry.path().extension() == ".yaml") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      auto doc = detail::read_cell(yaml::parse_file(f), f.string(), why);
      if (f.stem().string() != doc.id)
        throw SchemaError(f.string() + ": file name must be '" + doc.id + ".yaml'");
      docs.push_back(std::move(doc));
    }
  }
  return detail::finish_catalog(version, std::move(docs));
}

// JSON interchange: {schema_version, version, why: {principle: ...}, cells: [...]}.
inline Catalog parse_catalog(const nlohmann::json& j) {
  detail::ObjectReader r(j, "catalog");
  if (r.integer("schema_version") != kCatalogSchemaVersion)
    throw SchemaError("catalog: unsupported schema_version");
  auto version = r.str("version");
  const auto& why_obj = r.raw("why");
  if (!why_obj.is_object()) throw SchemaError("catalog.why: expected an object");
  std::map<std::string, WhySection> why;
  for (auto it = why_obj.begin(); it != why_obj.end(); ++it)
    why[it.key()] = detail::read_why(it.value(), "catalog.why." + it.key());
  std::vector<RecommendationDoc> docs;
  const auto& cells = r.array("cells");
  for (std::size_t i = 0; i < cells.size(); ++i)
    docs.push_back(detail::read_cell(cells[i], detail::indexed("catalog.cells", i), why));
  r.finish();
  return detail::finish_catalog(version, std::move(docs));
}

inline Catalog load_catalog(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return load_catalog_dir(path);
  if (path.extension() == ".json")
    return parse_catalog(detail::parse_json_text(yaml::read_file(path), path.string()));
  return load_catalog_dir(path.parent_path());
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const DeficitCase& c) {
  return {{"title", c.title}, {"summary", c.summary}};
}

inline nlohmann::json to_json(const WhySection& w) {
  auto cases = nlohmann::json::array();
  for (const auto& c : w.deficit_cases) cases.push_back(to_json(c));
  return {{"what_is", w.what_is}, {"why_care", w.why_care}, {"deficit_cases", cases}};
}

inline nlohmann::json to_json(const RecommendationDoc& d) {
  auto should = nlohmann::json::array();
  for (const auto& c : d.should) should.push_back({{"statement", c.statement}, {"verification", c.verification}});
  auto how = nlohmann::json::array();
  for (const auto& p : d.how) {
    auto tools = nlohmann::json::array();
    for (const auto& t : p.tools) tools.push_back({{"title", t.title}, {"url", t.url}, {"note", t.note}});
    auto links = nlohmann::json::array();
    for (const auto& l : p.links) links.push_back({{"title", l.title}, {"url", l.url}});
    how.push_back({{"instruction", p.instruction}, {"tools", tools}, {"links", links}});
  }
  return {{"id", d.id},           {"principle", d.principle}, {"level", to_string(d.level)},
          {"summary", d.summary}, {"why", to_json(d.why)},    {"should", should},
          {"how", how}};
}

inline RecommendationDoc recommendation_doc_from_json(const nlohmann::json& j) {
  RecommendationDoc d;
  d.id = j.at("id").get<std::string>();
  d.principle = j.at("principle").get<std::string>();
  d.level = level_from_json(j.at("level"));
  d.summary = j.at("summary").get<std::string>();
  const auto& w = j.at("why");
  d.why.what_is = w.at("what_is").get<std::string>();
  d.why.why_care = w.at("why_care").get<std::string>();
  for (const auto& c : w.at("deficit_cases"))
    d.why.deficit_cases.push_back({c.at("title").get<std::string>(), c.at("summary").get<std::string>()});
  for (const auto& c : j.at("should"))
    d.should.push_back({c.at("statement").get<std::string>(), c.at("verification").get<std::string>()});
  for (const auto& p : j.at("how")) {
    Practice pr;
    pr.instruction = p.at("instruction").get<std::string>();
    for (const auto& t : p.at("tools"))
      pr.tools.push_back({t.at("title").get<std::string>(), t.at("url").get<std::string>(),
                          t.at("note").get<std::string>()});
    for (const auto& l : p.at("links"))
      pr.links.push_back({l.at("title").get<std::string>(), l.at("url").get<std::string>()});
    d.how.push_back(std::move(pr));
  }
  return d;
}

// Canonical interchange form. The shared WHY is taken from each principle's
// low cell with its level-specific cases stripped, so per-level additions
// are re-emitted on their own cells.
inline nlohmann::json serialize_catalog(const Catalog& c) {
  auto why = nlohmann::json::object();
  auto cells = nlohmann::json::array();
  for (const auto& p : catalog_principles()) {
    // Shared cases are the common prefix of the three levels' case lists.
    const auto& low = c.docs.at({p.id, ImpactLevel::low}).why;
    std::size_t common = low.deficit_cases.size();
    for (auto l : all_levels()) {
      const auto& cases = c.docs.at({p.id, l}).why.deficit_cases;
      std::size_t n = 0;
      while (n < common && n < cases.size() && cases[n] == low.deficit_cases[n]) ++n;
      common = n;
    }
    WhySection shared = low;
    shared.deficit_cases.resize(common);
    why[p.id] = to_json(shared);
    for (auto l : all_levels()) {
      const auto& d = c.docs.at({p.id, l});
      auto cell = to_json(d);
      cell.erase("id");
      cell.erase("why");
      auto extra = nlohmann::json::array();
      for (std::size_t i = common; i < d.why.deficit_cases.size(); ++i)
        extra.push_back(to_json(d.why.deficit_cases[i]));
      cell["deficit_cases"] = extra;
      cells.push_back(cell);
    }
  }
  return {{"schema_version", kCatalogSchemaVersion}, {"version", c.version}, {"why", why}, {"cells", cells}};
}

// ---------------------------------------------------------------------------
// Lookup and assembly

inline const RecommendationDoc& lookup(const Catalog& catalog, const std::string& principle,
                                       ImpactLevel level) {
  if (!is_catalog_principle(principle))
    throw UnknownPrinciple("'" + principle + "' is not in the recommendation catalog");
  auto it = catalog.docs.find({principle, level});
  if (it == catalog.docs.end())
    throw IncompleteMatrix("catalog lacks cell " + cell_id(principle, level),
                           {cell_id(principle, level)});
  return it->second;
}

struct BundleSection {
  std::string principle;
  ImpactLevel level = ImpactLevel::low;
  RecommendationDoc doc;
  friend bool operator==(const BundleSection&, const BundleSection&) = default;
};

// A framed principle the catalog has no documents for.
struct UnmatchedPrinciple {
  std::string principle;
  std::optional<ImpactLevel> suggested_level;
  ImpactLevel final_level = ImpactLevel::low;
  std::string rationale;
  std::optional<Rational> score;
  friend bool operator==(const UnmatchedPrinciple&, const UnmatchedPrinciple&) = default;
};

struct RecommendationBundle {
  std::string catalog_version;
  std::vector<BundleSection> sections;  // high first, then by principle id
  std::vector<UnmatchedPrinciple> unmatched;
  friend bool operator==(const RecommendationBundle&, const RecommendationBundle&) = default;
};

inline RecommendationBundle assemble(const std::vector<FramingDecision>& framing,
                                     const Catalog& catalog, const ScoreMap& scores = {}) {
  std::map<std::string, const FramingDecision*> by_principle;
  for (const auto& d : framing)
    if (!by_principle.emplace(d.principle, &d).second)
      throw IncompleteFraming("principle '" + d.principle + "' framed more than once");
  for (const auto& p : catalog_principles())
    if (!by_principle.count(p.id))
      throw IncompleteFraming("catalog principle '" + p.id + "' has no framing decision");

  RecommendationBundle bundle;
  bundle.catalog_version = catalog.version;
  for (const auto& [principle, d] : by_principle) {
    if (is_catalog_principle(principle)) {
      bundle.sections.push_back({principle, d->final_level, lookup(catalog, principle, d->final_level)});
    } else {
      UnmatchedPrinciple u{principle, d->suggested_level, d->final_level, d->rationale, std::nullopt};
      if (auto it = scores.find(principle); it != scores.end()) u.score = it->second;
      bundle.unmatched.push_back(std::move(u));
    }
  }
  std::stable_sort(bundle.sections.begin(), bundle.sections.end(),
                   [](const BundleSection& a, const BundleSection& b) {
                     if (a.level != b.level) return a.level > b.level;
                     return a.principle < b.principle;
                   });
  return bundle;
}

inline nlohmann::json to_json(const RecommendationBundle& b) {
  auto sections = nlohmann::json::array();
  for (const auto& s : b.sections)
    sections.push_back({{"principle", s.principle}, {"level", to_string(s.level)}, {"doc", to_json(s.doc)}});
  auto unmatched = nlohmann::json::array();
  for (const auto& u : b.unmatched)
    unmatched.push_back(
        {{"principle", u.principle},
         {"suggested_level", u.suggested_level ? nlohmann::json(to_string(*u.suggested_level)) : nlohmann::json(nullptr)},
         {"final_level", to_string(u.final_level)},
         {"rationale", u.rationale},
         {"score", u.score ? rational_to_json(*u.score) : nlohmann::json(nullptr)}});
  return {{"catalog_version", b.catalog_version}, {"sections", sections}, {"unmatched_principles", unmatched}};
}

inline RecommendationBundle bundle_from_json(const nlohmann::json& j) {
  RecommendationBundle b;
  b.catalog_version = j.at("catalog_version").get<std::string>();
  for (const auto& s : j.at("sections"))
    b.sections.push_back({s.at("principle").get<std::string>(), level_from_json(s.at("level")),
                          recommendation_doc_from_json(s.at("doc"))});
  for (const auto& u : j.at("unmatched_principles")) {
    UnmatchedPrinciple up;
    up.principle = u.at("principle").get<std::string>();
    if (!u.at("suggested_level").is_null()) up.suggested_level = level_from_json(u.at("suggested_level"));
    up.final_level = level_from_json(u.at("final_level"));
    up.rationale = u.at("rationale").get<std::string>();
    if (!u.at("score").is_null()) up.score = rational_from_json(u.at("score"));
    b.unmatched.push_back(std::move(up));
  }
  return b;
}

}  // namespace eps
