#pragma once

#include "kinetunnel/protocol.hpp"

#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace kinetunnel {

enum class LogDirection { In, Out };

std::string_view to_string(LogDirection dir) noexcept;

/// One line of the append-only session log.
///
/// `msg` is the message as sent or received. An inbound line that was not
/// valid JSON is kept verbatim as a JSON string so replays see the same bytes.
struct LogRecord {
  double server_ts_ms = 0.0;
  std::string session;
  LogDirection dir = LogDirection::In;
  Json msg;
};

std::string to_jsonl(const LogRecord& record);
LogRecord parse_log_record(std::string_view line);
/// Throws SchemaViolation naming the line for malformed records.
std::vector<LogRecord> read_session_log(std::istream& in);
std::vector<LogRecord> load_session_log(const std::filesystem::path& path);
void write_session_log(std::ostream& out, std::span<const LogRecord> records);
void save_session_log(const std::filesystem::path& path, std::span<const LogRecord> records);

/// Session ids in order of first appearance.
std::vector<std::string> session_ids(std::span<const LogRecord> records);

struct HandlerSettings {
  const TrajectoryLibrary* library = nullptr;
  FeedbackConfig feedback;
  AnalysisOptions analysis;
};

/// Feeds the inbound half of one session through a fresh handler.
std::unique_ptr<SessionHandler> replay_session(std::span<const LogRecord> records, const std::string& session,
                                               const HandlerSettings& settings);

struct ReplayReport {
  std::size_t sessions = 0;
  std::size_t inbound = 0;
  std::size_t outbound = 0;
  bool identical = true;
  /// First difference found, empty when identical.
  std::string mismatch;
};

/// Replays every session and compares the regenerated outbound messages
/// with the logged ones, ignoring server timestamps.
ReplayReport verify_replay(std::span<const LogRecord> records, const HandlerSettings& settings);

/// Records a conversation with a handler, stamping each line with a caller-supplied clock.
class SessionRecorder {
 public:
  SessionRecorder(std::string session, const HandlerSettings& settings);

  std::vector<Json> send(const Json& msg, double server_ts_ms);
  const SessionHandler& handler() const { return handler_; }
  const std::vector<LogRecord>& records() const { return records_; }

 private:
  std::string session_;
  SessionHandler handler_;
  std::vector<LogRecord> records_;
};

}  // namespace kinetunnel
