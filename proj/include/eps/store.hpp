#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <regex>
#include <string>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "eps/errors.hpp"
#include "eps/hash.hpp"
#include "eps/review.hpp"

namespace eps {

// Append-only per-session event streams with optimistic concurrency:
// append succeeds only when expected_seq equals the stream's current head.
class EventStore {
 public:
  virtual ~EventStore() = default;

  virtual void append(const std::string& session_id, const SessionEvent& event,
                      std::uint64_t expected_seq) = 0;
  virtual std::vector<SessionEvent> load(const std::string& session_id) const = 0;
  virtual std::vector<std::string> sessions() const = 0;
};

namespace detail {

inline void check_append(const std::string& session_id, const SessionEvent& event,
                         std::uint64_t head, std::uint64_t expected_seq) {
  if (expected_seq != head)
    throw SequenceConflict("session '" + session_id + "': expected head " + std::to_string(expected_seq) +
                           ", actual head " + std::to_string(head));
  if (event.seq != head + 1)
    throw SequenceConflict("session '" + session_id + "': event seq " + std::to_string(event.seq) +
                           " does not follow head " + std::to_string(head));
}

inline void check_session_id(const std::string& id) {
  static const std::regex pattern("[A-Za-z0-9_-]{1,128}");
  if (!std::regex_match(id, pattern)) throw NotFound("invalid session id '" + id + "'");
}

}  // namespace detail

class MemoryStore final : public EventStore {
 public:
  void append(const std::string& session_id, const SessionEvent& event,
              std::uint64_t expected_seq) override {
    std::lock_guard lock(mutex_);
    auto& stream = streams_[session_id];
    std::uint64_t head = stream.empty() ? 0 : stream.back().seq;
    try {
      detail::check_append(session_id, event, head, expected_seq);
    } catch (...) {
      if (stream.empty()) streams_.erase(session_id);
      throw;
    }
    stream.push_back(event);
  }

  std::vector<SessionEvent> load(const std::string& session_id) const override {
    std::lock_guard lock(mutex_);
    auto it = streams_.find(session_id);
    if (it == streams_.end()) throw NotFound("session '" + session_id + "' not found");
    return it->second;
  }

  std::vector<std::string> sessions() const override {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : streams_) out.push_back(id);
    return out;
  }

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::vector<SessionEvent>> streams_;
};

// One log file per session under <root>/sessions. Each line is
// "<sha256 of body> <body>\n"; a torn or corrupt tail is ignored on load
// and truncated before the next append.
class FileStore final : public EventStore {
 public:
  explicit FileStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_ / "sessions");
  }

  const std::filesystem::path& root() const { return root_; }

  std::filesystem::path log_path(const std::string& session_id) const {
    return root_ / "sessions" / (session_id + ".log");
  }

  void append(const std::string& session_id, const SessionEvent& event,
              std::uint64_t expected_seq) override {
    detail::check_session_id(session_id);
    std::lock_guard lock(mutex_);
    auto path = log_path(session_id);
    std::vector<SessionEvent> events;
    std::uintmax_t valid_bytes = 0;
    if (std::filesystem::exists(path)) events = read_valid(path, valid_bytes);
    std::uint64_t head = events.empty() ? 0 : events.back().seq;
    detail::check_append(session_id, event, head, expected_seq);

    if (std::filesystem::exists(path) && std::filesystem::file_size(path) != valid_bytes)
      std::filesystem::resize_file(path, valid_bytes);
    auto body = to_json(event).dump();
    auto line = sha256_hex(body) + " " + body + "\n";
    int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw std::runtime_error("cannot open " + path.string());
    auto written = ::write(fd, line.data(), line.size());
    ::fsync(fd);
    ::close(fd);
    if (written != static_cast<ssize_t>(line.size()))
      throw std::runtime_error("short write to " + path.string());
  }

  std::vector<SessionEvent> load(const std::string& session_id) const override {
    detail::check_session_id(session_id);
    std::lock_guard lock(mutex_);
    auto path = log_path(session_id);
    if (!std::filesystem::exists(path)) throw NotFound("session '" + session_id + "' not found");
    std::uintmax_t valid_bytes = 0;
    auto events = read_valid(path, valid_bytes);
    if (events.empty()) throw NotFound("session '" + session_id + "' has no complete events");
    return events;
  }

  std::vector<std::string> sessions() const override {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& entry : std::filesystem::directory_iterator(root_ / "sessions"))
      if (entry.path().extension() == ".log") out.push_back(entry.path().stem().string());
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  // Returns the longest prefix of complete, checksummed, densely numbered events.
  static std::vector<SessionEvent> read_valid(const std::filesystem::path& path,
                                              std::uintmax_t& valid_bytes) {
    std::ifstream in(path, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<SessionEvent> events;
    valid_bytes = 0;
    std::size_t pos = 0;
    while (pos < content.size()) {
      auto nl = content.find('\n', pos);
      if (nl == std::string::npos) break;  // torn write
      std::string line = content.substr(pos, nl - pos);
      if (line.size() < 66 || line[64] != ' ') break;
      auto body = line.substr(65);
      if (sha256_hex(body) != line.substr(0, 64)) break;
      try {
        auto e = event_from_json(nlohmann::json::parse(body));
        if (e.seq != events.size() + 1) break;
        events.push_back(std::move(e));
      } catch (const std::exception&) {
        break;
      }
      pos = nl + 1;
      valid_bytes = pos;
    }
    return events;
  }

  std::filesystem::path root_;
  mutable std::mutex mutex_;
};

}  // namespace eps
