#pragma once

#include "kinetunnel/analytics.hpp"
#include "kinetunnel/error.hpp"
#include "kinetunnel/session.hpp"
#include "kinetunnel/trajectory_io.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kinetunnel {

// Message builders. Every message is one JSON object with a "type" field.

Json hand_sample_message(const HandSample& sample);
Json command_message(std::string_view action, Json args = Json::object());
Json feedback_message(const FeedbackUpdate& update);
Json error_message(ErrorCode code, std::string_view message);
Json error_summary_to_json(const ErrorSummary& summary);
/// `analysis` is null when the recording could not be segmented; the
/// reason then goes to "analysis_error".
Json summary_message(const SessionSummary& summary, const std::optional<ErrorSummary>& analysis,
                     std::string_view analysis_error = {});
/// Snapshot of a session for clients that (re)attach or need the geometry.
Json state_message(const Session& session);

// Readers. Schema problems raise BadMessage.

HandSample parse_hand_sample(const Json& msg);
FeedbackUpdate parse_feedback(const Json& msg);

/// Compact single-line rendering used on the wire and in logs.
std::string dump_line(const Json& msg);

/// Transport-free protocol engine for one connection.
///
/// Turns each inbound message into the outbound messages it causes. Errors
/// never escape: they become "error" messages and the session carries on.
class SessionHandler {
 public:
  explicit SessionHandler(const TrajectoryLibrary* library, FeedbackConfig feedback = {},
                          AnalysisOptions analysis = {});

  std::vector<Json> handle(const Json& msg);
  /// Parses one line first; malformed JSON yields a BadMessage error.
  std::vector<Json> handle_line(std::string_view line);

  const Session& session() const { return session_; }
  const std::string& subject() const { return subject_; }
  std::optional<Condition> condition() const { return condition_; }
  /// Exercise label used in summaries: the trajectory's metadata, else its id.
  std::string exercise_label() const;
  /// End-effector analysis of what has been tracked so far.
  ErrorSummary analyze() const;

 private:
  std::vector<Json> on_command(const Json& msg);
  Command parse_command(const std::string& action, const Json& args) const;

  const TrajectoryLibrary* library_;
  AnalysisOptions analysis_;
  Session session_;
  std::string subject_;
  std::optional<Condition> condition_;
};

}  // namespace kinetunnel
