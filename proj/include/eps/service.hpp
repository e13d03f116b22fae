#pragma once

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <regex>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eps/assessment_flow.hpp"
#include "eps/errors.hpp"
#include "eps/recommendation.hpp"
#include "eps/report.hpp"
#include "eps/review.hpp"
#include "eps/scoring.hpp"
#include "eps/store.hpp"
#include "eps/survey_model.hpp"
#include "eps/yaml_json.hpp"

namespace eps {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "eps-data";
  std::vector<std::filesystem::path> packs;
  std::vector<std::filesystem::path> catalogs;
  Thresholds thresholds;
  Strictness strictness;
  std::map<std::string, Actor> tokens;  // bearer token -> actor
};

namespace detail {

inline Rational config_rational(const nlohmann::json& v, const std::string& what) {
  try {
    if (v.is_string()) return parse_rational(v.get<std::string>());
    if (v.is_number_integer()) return Rational(v.get<std::int64_t>());
    if (v.is_number_float()) return parse_rational(v.dump());
  } catch (const SchemaError& e) {
    throw InvalidThresholds(what + ": " + e.what());
  }
  throw InvalidThresholds(what + ": expected a number or fraction");
}

inline void parse_bind(const std::string& bind, ServiceConfig& cfg) {
  auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw ConfigError("bind must be host:port, got '" + bind + "'");
  cfg.host = bind.substr(0, colon);
  try {
    cfg.port = std::stoi(bind.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("bind port is not a number in '" + bind + "'");
  }
  if (cfg.port < 0 || cfg.port > 65535) throw ConfigError("bind port out of range in '" + bind + "'");
}

}  // namespace detail

// Reads a YAML/JSON config file; EPS_BIND and EPS_DATA_DIR override it.
// Relative paths resolve against the config file's directory.
inline ServiceConfig load_config(const std::filesystem::path& path) {
  ServiceConfig cfg;
  auto doc = yaml::parse_file(path);
  auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  try {
    detail::ObjectReader r(doc, "config");
    if (r.has("bind")) detail::parse_bind(r.str("bind"), cfg);
    if (r.has("data_dir")) cfg.data_dir = resolve(r.str("data_dir"));
    for (const auto& p : r.strings_or_empty("packs")) cfg.packs.push_back(resolve(p));
    for (const auto& p : r.strings_or_empty("catalogs")) cfg.catalogs.push_back(resolve(p));
    if (r.has("thresholds")) {
      detail::ObjectReader t(r.raw("thresholds"), "config.thresholds");
      cfg.thresholds.low = detail::config_rational(t.raw("low"), "thresholds.low");
      cfg.thresholds.high = detail::config_rational(t.raw("high"), "thresholds.high");
      t.finish();
    }
    if (r.has("strictness")) {
      detail::ObjectReader s(r.raw("strictness"), "config.strictness");
      cfg.strictness.per_question_coverage = s.boolean_or("per_question_coverage", false);
      s.finish();
    }
    const auto& tokens = r.array_or_empty("tokens");
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      detail::ObjectReader t(tokens[i], detail::indexed("config.tokens", i));
      auto role = role_from_string(t.str("role"));
      if (!role) throw ConfigError("config.tokens[" + std::to_string(i) + "]: unknown role");
      cfg.tokens[t.str("token")] = Actor{t.str("actor"), *role};
      t.finish();
    }
    r.finish();
  } catch (const SchemaError& e) {
    throw ConfigError(e.what());
  }
  if (const char* bind = std::getenv("EPS_BIND")) detail::parse_bind(bind, cfg);
  if (const char* dir = std::getenv("EPS_DATA_DIR")) cfg.data_dir = dir;
  cfg.thresholds.validate();
  return cfg;
}

struct ApiRequest {
  std::string method;
  std::string path;
  std::string token;
  std::string body;
  std::map<std::string, std::string> query;
  std::string accept;
  std::optional<std::uint64_t> expected_seq;  // If-Match
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
  std::string session_state;  // mirrored into X-Session-State
};

inline std::string utc_now() {
  auto now = std::chrono::system_clock::now();
  auto t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string random_session_id() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  static constexpr char hex[] = "0123456789abcdef";
  std::string id = "s-";
  auto v = rng();
  for (int i = 0; i < 16; ++i) id += hex[(v >> (i * 4)) & 0xF];
  return id;
}

class Service {
 public:
  using Clock = std::function<std::string()>;
  using IdGenerator = std::function<std::string()>;

  Service(ServiceConfig config, std::shared_ptr<EventStore> store, Clock clock = utc_now,
          IdGenerator ids = random_session_id)
      : config_(std::move(config)), store_(std::move(store)), clock_(std::move(clock)), ids_(std::move(ids)) {
    config_.thresholds.validate();
    try {
      for (const auto& p : config_.packs) add_pack(load_pack(p), false);
      for (const auto& c : config_.catalogs) add_catalog(load_catalog(c), false);
      load_published();
    } catch (const HttpError& e) {
      throw ConfigError(e.what());
    }
  }

  const ServiceConfig& config() const { return config_; }

  ApiResponse handle(const ApiRequest& req) {
    try {
      return dispatch(req);
    } catch (const HttpError& e) {
      return error(e.status, e.code, e.what(), e.extra);
    } catch (const NotFound& e) {
      return error(404, e.code(), e.what());
    } catch (const IllegalTransition& e) {
      return error(409, e.code(), e.what());
    } catch (const SequenceConflict& e) {
      return error(409, e.code(), e.what());
    } catch (const SyntaxError& e) {
      return error(400, e.code(), e.what());
    } catch (const SchemaError& e) {
      return error(400, e.code(), e.what());
    } catch (const UnsupportedFormat& e) {
      return error(406, e.code(), e.what());
    } catch (const Error& e) {
      return error(422, e.code(), e.what());
    } catch (const nlohmann::json::exception& e) {
      return error(400, "SchemaError", e.what());
    }
  }

  void publish_pack(const SurveyPack& pack) { add_pack(pack, true); }
  void publish_catalog(const Catalog& catalog) { add_catalog(catalog, true); }

 private:
  struct HttpError : std::runtime_error {
    HttpError(int s, std::string c, const std::string& m, nlohmann::json x = nullptr)
        : std::runtime_error(m), status(s), code(std::move(c)), extra(std::move(x)) {}
    int status;
    std::string code;
    nlohmann::json extra;
  };

  static ApiResponse error(int status, const std::string& code, const std::string& message,
                           const nlohmann::json& extra = nullptr) {
    nlohmann::json body = {{"error", code}, {"message", message}};
    if (!extra.is_null()) body.update(extra);
    ApiResponse r;
    r.status = status;
    r.body = body.dump();
    if (body.contains("state")) r.session_state = body["state"].get<std::string>();
    return r;
  }

  static ApiResponse ok(nlohmann::json body, int status = 200) {
    ApiResponse r;
    r.status = status;
    if (body.contains("state")) r.session_state = body["state"].get<std::string>();
    r.body = body.dump();
    return r;
  }

  // --- registries -----------------------------------------------------------

  void add_pack(const SurveyPack& pack, bool persist) {
    auto report = validate_pack(pack, config_.strictness);
    if (!report.ok())
      throw HttpError(422, "ValidationFailed", "pack '" + pack.id + "' has validation errors",
                      {{"report", to_json(report)}});
    std::unique_lock lock(registry_mutex_);
    auto& versions = packs_[pack.id];
    for (const auto& existing : versions)
      if (existing.version == pack.version) {
        if (existing == pack) return;
        throw HttpError(409, "ImmutableVersion",
                        "pack " + pack.id + "@" + pack.version + " is already published with different content");
      }
    versions.push_back(pack);
    if (persist) write_blob("packs", pack.id + "@" + pack.version, serialize_pack_text(pack));
  }

  void add_catalog(const Catalog& catalog, bool persist) {
    std::unique_lock lock(registry_mutex_);
    for (const auto& existing : catalogs_)
      if (existing.version == catalog.version) {
        if (existing == catalog) return;
        throw HttpError(409, "ImmutableVersion",
                        "catalog " + catalog.version + " is already published with different content");
      }
    catalogs_.push_back(catalog);
    if (persist) write_blob("catalogs", catalog.version, canonical_dump(serialize_catalog(catalog)));
  }

  void write_blob(const std::string& kind, const std::string& name, const std::string& text) {
    auto dir = config_.data_dir / kind;
    std::filesystem::create_directories(dir);
    auto tmp = dir / (name + ".json.tmp");
    {
      std::ofstream out(tmp, std::ios::binary);
      out << text;
    }
    std::filesystem::rename(tmp, dir / (name + ".json"));
  }

  void load_published() {
    auto list = [&](const std::string& kind) {
      std::vector<std::filesystem::path> files;
      auto dir = config_.data_dir / kind;
      if (std::filesystem::is_directory(dir))
        for (const auto& e : std::filesystem::directory_iterator(dir))
          if (e.path().extension() == ".json") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      return files;
    };
    for (const auto& f : list("packs")) add_pack(load_pack(f), false);
    for (const auto& f : list("catalogs")) add_catalog(load_catalog(f), false);
  }

  const SurveyPack& find_pack(const std::string& id, const std::string& version) const {
    std::shared_lock lock(registry_mutex_);
    auto it = packs_.find(id);
    if (it == packs_.end() || it->second.empty()) throw NotFound("pack '" + id + "' not found");
    if (version.empty()) return it->second.back();
    for (const auto& p : it->second)
      if (p.version == version) return p;
    throw NotFound("pack " + id + "@" + version + " not found");
  }

  const Catalog& find_catalog(const std::string& version) const {
    std::shared_lock lock(registry_mutex_);
    if (catalogs_.empty()) throw NotFound("no recommendation catalog loaded");
    if (version.empty()) return catalogs_.back();
    for (const auto& c : catalogs_)
      if (c.version == version) return c;
    throw NotFound("catalog '" + version + "' not found");
  }

  // --- auth -------------------------------------------------------------------

  Actor authenticate(const ApiRequest& req) const {
    auto it = config_.tokens.find(req.token);
    if (req.token.empty() || it == config_.tokens.end())
      throw HttpError(401, "Unauthorized", "missing or unknown bearer token");
    return it->second;
  }

  static void require_role(const Actor& actor, std::initializer_list<Role> roles) {
    for (auto r : roles)
      if (actor.role == r) return;
    throw HttpError(403, "Forbidden", "role '" + to_string(actor.role) + "' may not perform this action");
  }

  static void require_access(const Actor& actor, const AssessmentSession& s) {
    if (actor.role == Role::respondent && s.owner != actor.id)
      throw HttpError(403, "Forbidden", "session belongs to another respondent");
  }

  // --- sessions ---------------------------------------------------------------

  AssessmentSession load_session(const std::string& id) const { return fold(store_->load(id)); }

  // Persists the events `next` added on top of `base`.
  AssessmentSession commit(const AssessmentSession& base, const AssessmentSession& next,
                           const ApiRequest& req) {
    if (req.expected_seq && *req.expected_seq != base.head_seq())
      throw SequenceConflict("If-Match " + std::to_string(*req.expected_seq) + " is stale; head is " +
                             std::to_string(base.head_seq()));
    std::uint64_t expected = base.head_seq();
    for (std::size_t i = base.events.size(); i < next.events.size(); ++i) {
      store_->append(next.id, next.events[i], expected);
      expected = next.events[i].seq;
    }
    return next;
  }

  static nlohmann::json session_body(const AssessmentSession& s) {
    return {{"state", to_string(*s.state)}, {"session", to_json(s)}};
  }

  static nlohmann::json parse_body(const ApiRequest& req) {
    if (req.body.empty()) return nlohmann::json::object();
    return detail::parse_json_text(req.body, "request body");
  }

  Deliverable rebuild_deliverable(const AssessmentSession& issued) const {
    // The deliverable is a pure function of the framed session, the pinned
    // catalog, and the issuance timestamp, so it is rebuilt rather than stored.
    std::vector<SessionEvent> framed_events(issued.events.begin(), issued.events.end() - 1);
    auto framed = fold(framed_events);
    const auto& pack = find_pack(issued.pack_id, issued.pack_version);
    const auto& catalog = find_catalog(issued.catalog_version);
    auto d = build_deliverable(framed, catalog, pack, issued.events.back().timestamp);
    const auto& payload = issued.events.back().payload;
    if (payload.contains("deliverable_sha256") &&
        payload["deliverable_sha256"].get<std::string>() != sha256_hex(render(d, ReportFormat::json)))
      throw StateError("rebuilt deliverable does not match the digest recorded at issuance");
    return d;
  }

  ApiResponse dispatch(const ApiRequest& req) {
    static const std::regex session_re(R"(^/v1/sessions/([A-Za-z0-9_-]+)(/[a-z]+)?$)");
    static const std::regex pack_re(R"(^/v1/packs/([^/]+)/([^/]+)$)");
    static const std::regex catalog_re(R"(^/v1/catalogs/([^/]+)$)");
    const auto& m = req.method;
    std::smatch match;

    if (m == "GET" && req.path == "/v1/health") return ok({{"status", "ok"}});
    Actor actor = authenticate(req);

    if (req.path == "/v1/packs") {
      if (m == "GET") {
        std::shared_lock lock(registry_mutex_);
        auto list = nlohmann::json::array();
        for (const auto& [id, versions] : packs_)
          for (const auto& p : versions) list.push_back({{"id", id}, {"version", p.version}});
        return ok({{"packs", list}});
      }
      if (m == "POST") {
        require_role(actor, {Role::admin});
        auto pack = parse_pack(parse_body(req));
        add_pack(pack, true);
        return ok({{"pack", {{"id", pack.id}, {"version", pack.version}}},
                   {"report", to_json(validate_pack(pack, config_.strictness))}},
                  201);
      }
    }
    if (std::regex_match(req.path, match, pack_re) && m == "GET")
      return ok(serialize_pack(find_pack(match[1], match[2])));

    if (req.path == "/v1/catalogs") {
      if (m == "GET") {
        std::shared_lock lock(registry_mutex_);
        auto list = nlohmann::json::array();
        for (const auto& c : catalogs_) list.push_back(c.version);
        return ok({{"catalogs", list}});
      }
      if (m == "POST") {
        require_role(actor, {Role::admin});
        auto catalog = parse_catalog(parse_body(req));
        add_catalog(catalog, true);
        return ok({{"catalog", catalog.version}, {"lints", to_json(catalog.lints)}}, 201);
      }
    }
    if (std::regex_match(req.path, match, catalog_re) && m == "GET")
      return ok(serialize_catalog(find_catalog(match[1])));

    if (req.path == "/v1/sessions" && m == "POST") {
      require_role(actor, {Role::respondent});
      auto body = parse_body(req);
      detail::ObjectReader r(body, "request");
      auto subject = subject_from_json(r.raw("subject"));
      auto pack_id = r.str("pack_id");
      auto pack_version = r.str_or("pack_version", "");
      r.finish();
      const auto& pack = find_pack(pack_id, pack_version);
      auto session = create_session(ids_(), subject, pack, actor, clock_());
      commit(AssessmentSession{}, session, req);
      return ok(session_body(session), 201);
    }

    if (!std::regex_match(req.path, match, session_re))
      throw HttpError(404, "NotFound", "no route for " + m + " " + req.path);
    const std::string id = match[1];
    const std::string action = match[2].matched ? std::string(match[2]).substr(1) : "";
    auto session = load_session(id);
    require_access(actor, session);

    if (m == "GET" && action.empty()) return ok(session_body(session));
    if (m == "GET" && action == "events") {
      auto body = session_body(session);
      body["events"] = audit_trail_json(session);
      return ok(body);
    }
    if (m == "POST" && action == "responses") {
      require_role(actor, {Role::respondent});
      auto responses = response_set_from_json(parse_body(req));
      const auto& pack = find_pack(session.pack_id, session.pack_version);
      const SurveyDefinition* survey = pack.find_survey(responses.survey_id);
      if (!survey) throw NotFound("survey '" + responses.survey_id + "' not in the session's pack");
      auto report = validate_responses(responses, *survey);
      if (!report.ok())
        throw HttpError(422, "ValidationFailed", "responses failed validation",
                        {{"report", to_json(report)}, {"state", to_string(*session.state)}});
      auto next = commit(session, submit_responses(session, responses, pack, actor, clock_()), req);
      auto body = session_body(next);
      if (survey->kind == SurveyKind::pre_assessment) body["routing"] = to_json(*next.routing);
      return ok(body);
    }
    if (m == "POST" && action == "score") {
      require_role(actor, {Role::respondent, Role::evaluator});
      const auto& pack = find_pack(session.pack_id, session.pack_version);
      auto next = commit(session, score(session, pack, config_.thresholds, actor, clock_()), req);
      auto body = session_body(next);
      body["score_card"] = to_json(*next.score_card);
      return ok(body);
    }
    if (m == "POST" && action == "review") {
      require_role(actor, {Role::evaluator});
      return ok(session_body(commit(session, open_review(session, actor, clock_()), req)));
    }
    if (m == "POST" && action == "framing") {
      require_role(actor, {Role::evaluator});
      auto body = parse_body(req);
      std::vector<FramingInput> inputs;
      for (const auto& d : body.at("decisions")) {
        detail::ObjectReader r(d, "decision");
        auto level = impact_level_from_string(r.str("final_level"));
        if (!level) throw SchemaError("decision.final_level: expected low, intermediate or high");
        inputs.push_back({r.str("principle"), *level, r.str_or("rationale", "")});
        r.finish();
      }
      auto next = commit(session, record_framing(session, inputs, actor, clock_()), req);
      return ok(session_body(next));
    }
    if (m == "GET" && action == "recommendations") {
      require_role(actor, {Role::evaluator, Role::respondent, Role::admin});
      if (!session.current_framing())
        throw IllegalTransition("session has no framing yet (state " + to_string(*session.state) + ")");
      auto version = req.query.count("catalog") ? req.query.at("catalog") : session.catalog_version;
      const auto& catalog = find_catalog(version);
      auto combined = session.score_card ? session.score_card->combined : ScoreMap{};
      auto body = session_body(session);
      body["recommendations"] = to_json(assemble(session.current_framing()->decisions, catalog, combined));
      return ok(body);
    }
    if (m == "POST" && action == "report") {
      require_role(actor, {Role::evaluator});
      auto body = parse_body(req);
      auto version = body.contains("catalog_version") ? body["catalog_version"].get<std::string>() : "";
      const auto& catalog = find_catalog(version);
      const auto& pack = find_pack(session.pack_id, session.pack_version);
      auto timestamp = clock_();
      auto deliverable = build_deliverable(session, catalog, pack, timestamp);
      auto digest = sha256_hex(render(deliverable, ReportFormat::json));
      auto next = commit(session, issue_report(session, catalog.version, actor, timestamp, digest), req);
      auto out = session_body(next);
      out["deliverable"] = to_json(deliverable);
      return ok(out, 201);
    }
    if (m == "GET" && action == "report") {
      if (session.state != SessionState::report_issued)
        throw IllegalTransition("no report issued (state " + to_string(*session.state) + ")");
      auto format = req.query.count("format") ? req.query.at("format")
                    : req.accept.find("text/markdown") != std::string::npos ? "markdown"
                                                                              : "json";
      auto deliverable = rebuild_deliverable(session);
      ApiResponse r;
      r.session_state = to_string(*session.state);
      auto fmt = report_format_from_string(format);
      r.body = render(deliverable, fmt);
      r.content_type = fmt == ReportFormat::json ? "application/json" : "text/markdown; charset=utf-8";
      return r;
    }
    if (m == "POST" && action == "withdraw") {
      require_role(actor, {Role::respondent, Role::admin});
      auto body = parse_body(req);
      auto reason = body.contains("reason") ? body["reason"].get<std::string>() : "";
      return ok(session_body(commit(session, withdraw(session, reason, actor, clock_()), req)));
    }
    throw HttpError(404, "NotFound", "no route for " + m + " " + req.path);
  }

  ServiceConfig config_;
  std::shared_ptr<EventStore> store_;
  Clock clock_;
  IdGenerator ids_;
  mutable std::shared_mutex registry_mutex_;
  std::map<std::string, std::vector<SurveyPack>> packs_;  // id -> versions in publish order
  std::vector<Catalog> catalogs_;
};

}  // namespace eps
