#include "kinetunnel/session_log.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <set>

namespace kinetunnel {

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::SchemaViolation, "line " + std::to_string(line) + ": " + what);
}

std::vector<Json> feed(SessionHandler& handler, const Json& msg) {
  return msg.is_string() ? handler.handle_line(msg.get<std::string>()) : handler.handle(msg);
}

}  // namespace

std::string_view to_string(LogDirection dir) noexcept { return dir == LogDirection::In ? "in" : "out"; }

std::string to_jsonl(const LogRecord& r) {
  const Json line{{"server_ts_ms", r.server_ts_ms},
                  {"session", r.session},
                  {"dir", std::string(to_string(r.dir))},
                  {"msg", r.msg}};
  return dump_line(line);
}

LogRecord parse_log_record(std::string_view line) {
  const Json doc = Json::parse(line.begin(), line.end());
  if (!doc.is_object()) throw Error(ErrorCode::SchemaViolation, "log record must be an object");
  LogRecord r;
  const auto ts = doc.find("server_ts_ms");
  const auto session = doc.find("session");
  const auto dir = doc.find("dir");
  const auto msg = doc.find("msg");
  if (ts == doc.end() || !ts->is_number()) throw Error(ErrorCode::SchemaViolation, "'server_ts_ms' missing");
  if (session == doc.end() || !session->is_string()) throw Error(ErrorCode::SchemaViolation, "'session' missing");
  if (dir == doc.end() || !dir->is_string() || (*dir != "in" && *dir != "out")) {
    throw Error(ErrorCode::SchemaViolation, "'dir' must be \"in\" or \"out\"");
  }
  if (msg == doc.end()) throw Error(ErrorCode::SchemaViolation, "'msg' missing");
  r.server_ts_ms = ts->get<double>();
  r.session = session->get<std::string>();
  r.dir = *dir == "in" ? LogDirection::In : LogDirection::Out;
  r.msg = *msg;
  return r;
}

std::vector<LogRecord> read_session_log(std::istream& in) {
  std::vector<LogRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_log_record(line));
    } catch (const Error& e) {
      fail(line_no, e.what());
    } catch (const nlohmann::json::exception&) {
      fail(line_no, "malformed JSON");
    }
  }
  return out;
}

std::vector<LogRecord> load_session_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read " + path.string());
  try {
    return read_session_log(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_session_log(std::ostream& out, std::span<const LogRecord> records) {
  for (const LogRecord& r : records) out << to_jsonl(r) << '\n';
}

void save_session_log(const std::filesystem::path& path, std::span<const LogRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  write_session_log(out, records);
  if (!out) throw Error(ErrorCode::InvalidArgument, "failed writing " + path.string());
}

std::vector<std::string> session_ids(std::span<const LogRecord> records) {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const LogRecord& r : records) {
    if (seen.insert(r.session).second) ids.push_back(r.session);
  }
  return ids;
}

std::unique_ptr<SessionHandler> replay_session(std::span<const LogRecord> records, const std::string& session,
                                               const HandlerSettings& settings) {
  auto handler = std::make_unique<SessionHandler>(settings.library, settings.feedback, settings.analysis);
  for (const LogRecord& r : records) {
    if (r.session == session && r.dir == LogDirection::In) feed(*handler, r.msg);
  }
  return handler;
}

ReplayReport verify_replay(std::span<const LogRecord> records, const HandlerSettings& settings) {
  ReplayReport report;
  for (const std::string& id : session_ids(records)) {
    ++report.sessions;
    SessionHandler handler(settings.library, settings.feedback, settings.analysis);
    std::vector<Json> produced;
    std::vector<const Json*> logged;
    for (const LogRecord& r : records) {
      if (r.session != id) continue;
      if (r.dir == LogDirection::In) {
        ++report.inbound;
        for (Json& m : feed(handler, r.msg)) produced.push_back(std::move(m));
      } else {
        ++report.outbound;
        logged.push_back(&r.msg);
      }
    }
    if (produced.size() != logged.size()) {
      report.identical = false;
      if (report.mismatch.empty()) {
        report.mismatch = "session " + id + ": replay produced " + std::to_string(produced.size()) +
                          " messages, log holds " + std::to_string(logged.size());
      }
      continue;
    }
    for (std::size_t k = 0; k < produced.size(); ++k) {
      if (dump_line(produced[k]) != dump_line(*logged[k])) {
        report.identical = false;
        if (report.mismatch.empty()) {
          report.mismatch = "session " + id + ": outbound message " + std::to_string(k) + " differs";
        }
        break;
      }
    }
  }
  return report;
}

SessionRecorder::SessionRecorder(std::string session, const HandlerSettings& settings)
    : session_(std::move(session)), handler_(settings.library, settings.feedback, settings.analysis) {}

std::vector<Json> SessionRecorder::send(const Json& msg, double server_ts_ms) {
  records_.push_back({server_ts_ms, session_, LogDirection::In, msg});
  std::vector<Json> out = feed(handler_, msg);
  for (const Json& m : out) records_.push_back({server_ts_ms, session_, LogDirection::Out, m});
  return out;
}

}  // namespace kinetunnel
