// eps: validate packs and catalogs, score responses offline, serve the API.
//
// Exit codes: 0 ok, 1 domain error (invalid input, failed validation),
// 2 environment error (missing files, I/O, bind failures).

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <pthread.h>

#include "CLI11.hpp"

#include "eps/eps.hpp"
#include "eps/http_server.hpp"
#include "eps/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kDomain = 1;
constexpr int kEnvironment = 2;

int exit_code_for(const eps::Error& e) {
  if (e.code() == "NotFound" || e.code() == "ConfigError") return kEnvironment;
  return kDomain;
}

bool is_catalog_path(const fs::path& path) {
  if (fs::is_directory(path)) return fs::exists(path / "catalog.yaml");
  if (path.filename() == "catalog.yaml") return true;
  if (path.extension() == ".json") {
    try {
      auto j = json::parse(eps::yaml::read_file(path));
      return j.is_object() && j.contains("cells");
    } catch (const std::exception&) {
      return false;
    }
  }
  return false;
}

struct ValidateResult {
  std::string path;
  std::string kind;
  eps::ValidationReport report;
};

ValidateResult validate_one(const fs::path& path, const eps::Strictness& strictness) {
  ValidateResult out{path.string(), is_catalog_path(path) ? "catalog" : "pack", {}};
  try {
    if (out.kind == "catalog") {
      auto catalog = eps::load_catalog(path);
      out.report.merge(catalog.lints);
    } else {
      auto pack = eps::load_pack(path);
      out.report.merge(eps::validate_pack(pack, strictness));
    }
  } catch (const eps::IncompleteMatrix& e) {
    for (const auto& cell : e.missing_cells())
      out.report.error("IncompleteMatrix", "cell:" + cell, "missing (principle, level) document");
  } catch (const eps::NotFound&) {
    throw;
  } catch (const eps::Error& e) {
    out.report.error(e.code(), path.string(), e.what());
  }
  return out;
}

int cmd_validate(const std::vector<std::string>& paths, const std::string& format, bool strict) {
  eps::Strictness strictness;
  strictness.per_question_coverage = strict;
  std::vector<ValidateResult> results;
  for (const auto& p : paths) {
    if (!fs::exists(p)) {
      std::cerr << "eps validate: " << p << ": no such file or directory\n";
      return kEnvironment;
    }
    try {
      results.push_back(validate_one(p, strictness));
    } catch (const eps::NotFound& e) {
      std::cerr << "eps validate: " << e.what() << "\n";
      return kEnvironment;
    }
  }
  bool ok = true;
  for (const auto& r : results) ok = ok && r.report.ok();
  if (format == "json") {
    auto arr = json::array();
    for (const auto& r : results)
      arr.push_back({{"path", r.path}, {"kind", r.kind}, {"report", eps::to_json(r.report)}});
    std::cout << eps::canonical_dump({{"ok", ok}, {"results", arr}});
  } else {
    for (const auto& r : results) {
      std::cout << r.path << " (" << r.kind << "): " << (r.report.ok() ? "OK" : "INVALID") << "\n";
      auto text = eps::to_text(r.report);
      if (!text.empty()) std::cout << text;
    }
  }
  return ok ? kOk : kDomain;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string render_text(const eps::ScoreCard& card, const eps::RoutingResult& routing) {
  std::ostringstream out;
  out << "Routing\n";
  if (routing.required_aias.empty()) out << "  no AIA triggered\n";
  for (const auto& aia : routing.required_aias) {
    out << "  " << aia << " <-";
    for (const auto& src : routing.rationale.at(aia)) out << " " << src.question << "=" << src.option;
    out << "\n";
  }
  out << "  troubleshoot: " << routing.troubleshoot << "\n";

  for (const auto& a : card.aias) {
    out << "\nAIA " << a.aia_id << "\n";
    out << "  " << pad("Principle", 16) << pad("Score", 10) << pad("Max Score", 12) << "Impact Score\n";
    for (const auto& [p, t] : a.tallies)
      out << "  " << pad(p, 16) << pad(eps::to_decimal_string(t.raw_score), 10)
          << pad(eps::to_decimal_string(t.max_score), 12)
          << eps::to_decimal_string(a.impact_scores.at(p)) << "\n";
    out << "  AIA Score: " << eps::to_decimal_string(a.aia_score) << " (" << a.tallies.size()
        << " evaluated principles)\n";
  }

  out << "\nCombined\n";
  out << "  " << pad("Principle", 16) << pad("Score", 10) << "Suggested Level\n";
  for (const auto& [p, s] : card.combined)
    out << "  " << pad(p, 16) << pad(eps::to_decimal_string(s), 10)
        << eps::to_string(card.suggested_levels.at(p)) << "\n";
  out << "\nThresholds: low < " << eps::to_decimal_string(card.thresholds.low)
      << " <= intermediate < " << eps::to_decimal_string(card.thresholds.high) << " <= high\n";
  return out.str();
}

int cmd_assess(const std::string& pack_path, const std::vector<std::string>& response_paths,
               const std::string& thresholds_text, const std::string& out_path,
               const std::string& format, const std::string& session_id) {
  auto pack = eps::load_pack(pack_path);
  auto report = eps::validate_pack(pack);
  if (!report.ok()) {
    std::cerr << "eps assess: pack is invalid\n" << eps::to_text(report);
    return kDomain;
  }
  auto thresholds = thresholds_text.empty() ? eps::Thresholds{} : eps::parse_thresholds(thresholds_text);
  thresholds.validate();

  std::map<std::string, eps::ResponseSet> responses;
  for (const auto& p : response_paths) {
    std::string text;
    if (p == "-") {
      std::ostringstream buf;
      buf << std::cin.rdbuf();
      text = buf.str();
    } else {
      text = eps::yaml::read_file(p);
    }
    auto set = eps::response_set_from_json(eps::detail::parse_json_text(text, p));
    if (responses.count(set.survey_id))
      throw eps::InvalidResponses("responses for survey '" + set.survey_id + "' given twice");
    responses.emplace(set.survey_id, std::move(set));
  }

  const auto& pre = *pack.pre_assessment();
  auto pre_it = responses.find(pre.id);
  if (pre_it == responses.end())
    throw eps::IncompleteResponses("missing responses for required survey '" + pre.id + "'");
  eps::require_valid(eps::validate_responses(pre_it->second, pre), pre.id);
  auto routing = eps::route(pre_it->second, pack);

  for (const auto& id : eps::administered_set(routing)) {
    auto it = responses.find(id);
    if (it == responses.end()) {
      if (id == routing.troubleshoot) {
        std::cerr << "eps assess: note: no responses for troubleshoot survey '" << id << "'\n";
        continue;
      }
      throw eps::IncompleteResponses("missing responses for required survey '" + id + "'");
    }
    eps::require_valid(eps::validate_responses(it->second, *pack.find_survey(id)), id);
  }
  for (const auto& [id, _] : responses) {
    auto admin = eps::administered_set(routing);
    if (id != pre.id && std::find(admin.begin(), admin.end(), id) == admin.end())
      std::cerr << "eps assess: note: survey '" << id << "' was not routed; ignored\n";
  }

  auto card = eps::score_session(session_id, pack, routing, responses, thresholds);
  auto canonical = eps::canonical_dump(eps::to_json(card));
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
      std::cerr << "eps assess: cannot write " << out_path << "\n";
      return kEnvironment;
    }
    out << canonical;
  }
  if (format == "json")
    std::cout << canonical;
  else
    std::cout << render_text(card, routing);
  return kOk;
}

int cmd_serve(std::string config_path) {
  if (config_path.empty()) {
    if (const char* env = std::getenv("EPS_CONFIG")) config_path = env;
  }
  if (config_path.empty()) {
    std::cerr << "eps serve: no config (use --config or EPS_CONFIG)\n";
    return kEnvironment;
  }
  auto config = eps::load_config(config_path);

  // Block termination signals before any thread starts so sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  auto store = std::make_shared<eps::FileStore>(config.data_dir);
  eps::Service service(config, store);
  eps::HttpServer server(service);
  int port = server.bind(config.host, config.port);
  server.start_background();
  std::cout << "eps: listening on " << config.host << ":" << port << std::endl;

  int sig = 0;
  sigwait(&signals, &sig);
  std::cout << "eps: shutting down" << std::endl;
  server.stop();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ethics assessment toolkit: survey packs, scoring, review and reports"};
  app.require_subcommand(1);

  std::vector<std::string> validate_paths;
  std::string validate_format = "text";
  bool strict = false;
  auto* validate = app.add_subcommand("validate", "Validate survey packs and recommendation catalogs");
  validate->add_option("paths", validate_paths, "Pack or catalog directories / JSON files")->required();
  validate->add_option("--format", validate_format)->check(CLI::IsMember({"text", "json"}));
  validate->add_flag("--strict", strict, "Require principle coverage per question");

  std::string pack_path, thresholds, out_path, assess_format = "text", session_id = "offline";
  std::vector<std::string> response_paths;
  auto* assess = app.add_subcommand("assess", "Route and score responses offline");
  assess->add_option("--pack", pack_path, "Survey pack directory or JSON")->required();
  assess->add_option("--responses", response_paths, "Response set files ('-' for stdin)")->required();
  assess->add_option("--thresholds", thresholds, "low,high classification thresholds");
  assess->add_option("--out", out_path, "Write the canonical JSON score card here");
  assess->add_option("--format", assess_format)->check(CLI::IsMember({"text", "json"}));
  assess->add_option("--session-id", session_id, "Identifier recorded in the score card");

  std::string config_path;
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--config", config_path, "Config file (defaults to $EPS_CONFIG)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kEnvironment;
  }

  const char* command = validate->parsed() ? "validate" : assess->parsed() ? "assess" : "serve";
  try {
    if (validate->parsed()) return cmd_validate(validate_paths, validate_format, strict);
    if (assess->parsed())
      return cmd_assess(pack_path, response_paths, thresholds, out_path, assess_format, session_id);
    return cmd_serve(config_path);
  } catch (const eps::Error& e) {
    std::cerr << "eps " << command << ": " << e.code() << ": " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "eps " << command << ": " << e.what() << "\n";
    return kEnvironment;
  }
}
