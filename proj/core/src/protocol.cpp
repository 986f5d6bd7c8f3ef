#include "kinetunnel/protocol.hpp"

#include <cmath>
#include <limits>

namespace kinetunnel {

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::BadMessage, what); }

Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Json rgb_json(const Rgb& c) { return Json::array({c.r, c.g, c.b}); }

// Non-finite numbers have no JSON form; they travel as null.
Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double number_field(const Json& obj, const char* field) {
  const auto it = obj.find(field);
  if (it == obj.end() || !it->is_number()) bad(std::string("'") + field + "' must be a number");
  return it->get<double>();
}

double optional_number(const Json& obj, const char* field, double fallback) {
  const auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_number()) bad(std::string("'") + field + "' must be a number");
  return it->get<double>();
}

std::string string_field(const Json& obj, const char* field) {
  const auto it = obj.find(field);
  if (it == obj.end() || !it->is_string()) bad(std::string("'") + field + "' must be a string");
  return it->get<std::string>();
}

Vec3 vec_field(const Json& obj, const char* field) {
  const auto it = obj.find(field);
  if (it == obj.end() || !it->is_array() || it->size() != 3) {
    bad(std::string("'") + field + "' must be [x, y, z]");
  }
  Vec3 v;
  for (std::size_t a = 0; a < 3; ++a) {
    if (!(*it)[a].is_number()) bad(std::string("'") + field + "' must hold numbers");
    v[static_cast<Eigen::Index>(a)] = (*it)[a].get<double>();
  }
  return v;
}

std::size_t index_field(const Json& obj, const char* field) {
  const auto it = obj.find(field);
  if (it == obj.end() || !it->is_number_unsigned()) bad(std::string("'") + field + "' must be a count");
  return it->get<std::size_t>();
}

}  // namespace

Json hand_sample_message(const HandSample& sample) {
  return Json{{"type", "hand_sample"}, {"t_ms", sample.t_ms}, {"pos_m", vec_json(sample.pos)}};
}

Json command_message(std::string_view action, Json args) {
  return Json{{"type", "command"}, {"action", std::string(action)}, {"args", std::move(args)}};
}

Json feedback_message(const FeedbackUpdate& u) {
  Json spheres = Json::array();
  for (const SphereChange& c : u.changed) {
    spheres.push_back({{"index", c.index}, {"scale", c.look.scale}, {"rgb", rgb_json(c.look.color)}});
  }
  return Json{{"type", "feedback"},
              {"t_ms", u.t_ms},
              {"nearest_index", u.nearest_index},
              {"current_error_m", u.current_error},
              {"path_point_m", vec_json(u.path_point)},
              {"repetition", u.repetition},
              {"spheres", std::move(spheres)}};
}

Json error_message(ErrorCode code, std::string_view message) {
  return Json{{"type", "error"}, {"code", std::string(to_string(code))}, {"message", std::string(message)}};
}

Json error_summary_to_json(const ErrorSummary& s) {
  Json per_sample = Json::array();
  for (const auto& rep : s.per_sample_rmse) per_sample.push_back(rep);
  return Json{{"space", std::string(to_string(s.space))},
              {"subject", s.subject_id},
              {"exercise", s.exercise_id},
              {"condition", std::string(to_string(s.condition))},
              {"err", s.err},
              {"per_rep_mean", s.per_rep_mean},
              {"per_joint_err", s.per_joint_err},
              {"per_sample_rmse", std::move(per_sample)}};
}

Json summary_message(const SessionSummary& summary, const std::optional<ErrorSummary>& analysis,
                     std::string_view analysis_error) {
  Json best = Json::array();
  for (double e : summary.best_errors) best.push_back(number_or_null(e));
  Json path = Json::array();
  for (const HandSample& s : summary.tracked_path) {
    path.push_back({s.t_ms, s.pos.x(), s.pos.y(), s.pos.z()});
  }
  Json msg{{"type", "summary"},
           {"trajectory_id", summary.trajectory_id},
           {"ci", std::string(to_string(summary.ci))},
           {"mode", std::string(to_string(summary.mode))},
           {"repetitions", summary.repetitions},
           {"samples", summary.tracked_path.size()},
           {"best_errors_m", std::move(best)},
           {"analysis", analysis ? error_summary_to_json(*analysis) : Json(nullptr)}};
  if (!analysis_error.empty()) msg["analysis_error"] = std::string(analysis_error);
  msg["tracked_path"] = std::move(path);
  return msg;
}

Json state_message(const Session& session) {
  Json calibration = Json::array();
  for (const Vec3& p : session.calibration_points()) calibration.push_back(vec_json(p));
  const bool calibrated = session.phase() != Phase::Calibrating;
  Json frame = nullptr;
  if (calibrated) {
    const Frame& f = session.frame();
    frame = Json{{"origin_m", vec_json(f.origin)},
                 {"axes", Json::array({vec_json(f.axes.col(0)), vec_json(f.axes.col(1)),
                                       vec_json(f.axes.col(2))})}};
  }
  Json trajectory = nullptr;
  if (session.selected()) trajectory = trajectory_to_json(session.placed_trajectory());
  return Json{{"type", "state"},
              {"phase", std::string(to_string(session.phase()))},
              {"calibration_points_m", std::move(calibration)},
              {"frame", std::move(frame)},
              {"trajectory", std::move(trajectory)},
              {"placement_m", vec_json(session.placement())},
              {"ci", std::string(to_string(session.ci()))},
              {"ci_diameter_m", diameter(session.ci())},
              {"mode", std::string(to_string(session.mode()))},
              {"repetitions", session.repetitions()}};
}

HandSample parse_hand_sample(const Json& msg) {
  HandSample s;
  s.t_ms = number_field(msg, "t_ms");
  s.pos = vec_field(msg, "pos_m");
  return s;
}

FeedbackUpdate parse_feedback(const Json& msg) {
  FeedbackUpdate u;
  u.t_ms = number_field(msg, "t_ms");
  u.nearest_index = index_field(msg, "nearest_index");
  u.current_error = number_field(msg, "current_error_m");
  u.path_point = vec_field(msg, "path_point_m");
  u.repetition = index_field(msg, "repetition");
  const auto spheres = msg.find("spheres");
  if (spheres == msg.end() || !spheres->is_array()) bad("'spheres' must be an array");
  for (const Json& s : *spheres) {
    SphereChange c;
    c.index = index_field(s, "index");
    c.look.scale = number_field(s, "scale");
    const Vec3 rgb = vec_field(s, "rgb");
    c.look.color = {rgb.x(), rgb.y(), rgb.z()};
    u.changed.push_back(c);
  }
  return u;
}

std::string dump_line(const Json& msg) {
  return msg.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

SessionHandler::SessionHandler(const TrajectoryLibrary* library, FeedbackConfig feedback,
                               AnalysisOptions analysis)
    : library_(library), analysis_(analysis), session_(feedback) {
  // Live summaries take however many repetitions were performed.
  analysis_.repetitions = 0;
}

std::vector<Json> SessionHandler::handle_line(std::string_view line) {
  Json msg;
  try {
    msg = Json::parse(line.begin(), line.end());
  } catch (const nlohmann::json::parse_error& e) {
    return {error_message(ErrorCode::BadMessage, "malformed JSON at byte " + std::to_string(e.byte))};
  }
  return handle(msg);
}

std::vector<Json> SessionHandler::handle(const Json& msg) {
  try {
    if (!msg.is_object()) bad("message must be a JSON object");
    const std::string type = string_field(msg, "type");
    if (type == "hand_sample") {
      return {feedback_message(session_.process_sample(parse_hand_sample(msg)))};
    }
    if (type == "command") return on_command(msg);
    if (type == "feedback" || type == "summary" || type == "error" || type == "state") {
      bad("'" + type + "' messages are only sent by the server");
    }
    bad("unknown message type '" + type + "'");
  } catch (const Error& e) {
    return {error_message(e.code(), e.what())};
  } catch (const nlohmann::json::exception& e) {
    return {error_message(ErrorCode::BadMessage, e.what())};
  }
}

Command SessionHandler::parse_command(const std::string& action, const Json& args) const {
  if (action == "calibrate") return command::Calibrate{vec_field(args, "point_m")};
  if (action == "select") {
    if (const auto inline_traj = args.find("trajectory"); inline_traj != args.end()) {
      return command::SelectTrajectory{trajectory_from_json(*inline_traj)};
    }
    const std::string id = string_field(args, "id");
    const Trajectory* t = library_ ? library_->find(id) : nullptr;
    if (!t) throw Error(ErrorCode::UnknownTrajectory, "no trajectory named '" + id + "'");
    return command::SelectTrajectory{*t};
  }
  if (action == "place_move") {
    return command::PlaceMove{optional_number(args, "dx_m", 0.0), optional_number(args, "dy_m", 0.0),
                              optional_number(args, "dz_m", 0.0)};
  }
  if (action == "set_ci") return command::SetCI{parse_confidence_interval(string_field(args, "ci"))};
  if (action == "start") return command::Start{};
  if (action == "stop") return command::Stop{};
  if (action == "set_mode") return command::SetMode{parse_feedback_mode(string_field(args, "mode"))};
  if (action == "reset_tunnel") return command::ResetTunnel{};
  bad("unknown action '" + action + "'");
}

std::vector<Json> SessionHandler::on_command(const Json& msg) {
  const std::string action = string_field(msg, "action");
  Json args = Json::object();
  if (const auto it = msg.find("args"); it != msg.end() && !it->is_null()) {
    if (!it->is_object()) bad("'args' must be an object");
    args = *it;
  }
  if (action == "state") return {state_message(session_)};

  // Start metadata is read before the command so a bad value leaves the session untouched.
  std::string subject = subject_;
  std::optional<Condition> condition = condition_;
  if (action == "start") {
    subject = args.contains("subject") ? string_field(args, "subject") : std::string();
    condition.reset();
    if (args.contains("condition")) condition = parse_condition(string_field(args, "condition"));
  }

  const CommandOutcome outcome = session_.apply(parse_command(action, args));
  if (action == "start") {
    subject_ = std::move(subject);
    condition_ = condition;
  }

  std::vector<Json> out;
  if (outcome.feedback) out.push_back(feedback_message(*outcome.feedback));
  if (outcome.summary) {
    try {
      out.push_back(summary_message(*outcome.summary, analyze()));
    } catch (const Error& e) {
      out.push_back(summary_message(*outcome.summary, std::nullopt, e.what()));
    }
  }
  out.push_back(state_message(session_));
  return out;
}

std::string SessionHandler::exercise_label() const {
  if (!session_.selected()) return {};
  const Trajectory& t = *session_.selected();
  return t.metadata.exercise.empty() ? t.id : t.metadata.exercise;
}

ErrorSummary SessionHandler::analyze() const {
  if (!session_.selected()) throw Error(ErrorCode::InvalidArgument, "no trajectory selected");
  ErrorSummary s = analyze_end_effector(session_.tracked_path(), session_.placed_trajectory(), analysis_);
  s.subject_id = subject_;
  s.exercise_id = exercise_label();
  s.condition = condition_.value_or(condition_for(session_.ci()));
  return s;
}

}  // namespace kinetunnel
