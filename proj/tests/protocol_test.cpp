#include "kinetunnel/protocol.hpp"
#include "kinetunnel/session_log.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace kinetunnel;
using namespace kinetunnel::testing;

namespace {

const std::string kData = KINETUNNEL_TEST_DATA;

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string run_conversation(const std::vector<std::string>& lines) {
  static const TrajectoryLibrary lib = TrajectoryLibrary::with_exercises();
  SessionHandler handler(&lib);
  std::string out;
  for (const std::string& line : lines) {
    for (const Json& m : handler.handle_line(line)) out += dump_line(m) + "\n";
  }
  return out;
}

Json cmd(std::string_view action, Json args = Json::object()) { return command_message(action, std::move(args)); }

// Calibrated, T1 selected, executing.
SessionHandler& started(SessionHandler& h) {
  h.handle(cmd("calibrate", {{"point_m", {0, 0, 0}}}));
  h.handle(cmd("calibrate", {{"point_m", {1, 0, 0}}}));
  h.handle(cmd("calibrate", {{"point_m", {0, 1, 0}}}));
  h.handle(cmd("select", {{"id", "T1"}}));
  h.handle(cmd("start", {{"subject", "s"}, {"condition", "c1"}}));
  return h;
}

}  // namespace

TEST(Golden, ConversationIsByteIdentical) {
  const auto in = read_lines(kData + "/conversation_in.jsonl");
  ASSERT_FALSE(in.empty());
  const std::string produced = run_conversation(in);
  const std::string path = kData + "/conversation_out.jsonl";
  if (const char* update = std::getenv("KINETUNNEL_UPDATE_GOLDEN"); update && std::string(update) == "1") {
    std::ofstream(path, std::ios::binary) << produced;
  }
  EXPECT_EQ(produced, slurp(path));
  // Running it twice must not differ either.
  EXPECT_EQ(run_conversation(in), produced);
}

TEST(Golden, ConversationShape) {
  const auto out = read_lines(kData + "/conversation_out.jsonl");
  ASSERT_FALSE(out.empty());
  std::size_t feedback = 0, states = 0, summaries = 0;
  for (const std::string& line : out) {
    const Json m = Json::parse(line);
    const std::string type = m.at("type");
    feedback += type == "feedback";
    states += type == "state";
    if (type == "summary") {
      ++summaries;
      EXPECT_EQ(m.at("trajectory_id"), "T1");
      EXPECT_EQ(m.at("samples"), 50);
      ASSERT_TRUE(m.at("analysis").is_object()) << line;
      EXPECT_EQ(m.at("analysis").at("subject"), "golden");
      EXPECT_EQ(m.at("analysis").at("condition"), "c2");
    }
    EXPECT_NE(type, "error") << line;
  }
  EXPECT_EQ(summaries, 1U);
  EXPECT_EQ(feedback, 50U + 1U);
  EXPECT_EQ(states, 8U);
}

TEST(Messages, FeedbackRoundTrip) {
  FeedbackUpdate u;
  u.t_ms = 1234.5;
  u.nearest_index = 17;
  u.current_error = 0.0125;
  u.path_point = Vec3(0.1, -0.2, 0.3);
  u.repetition = 2;
  u.changed = {{3, {0.5, {10, 20, 30}}}, {17, {1.0, {255, 0, 0}}}};
  const Json m = feedback_message(u);
  EXPECT_EQ(m.at("type"), "feedback");
  const FeedbackUpdate back = parse_feedback(Json::parse(dump_line(m)));
  EXPECT_EQ(back.t_ms, u.t_ms);
  EXPECT_EQ(back.nearest_index, u.nearest_index);
  EXPECT_EQ(back.current_error, u.current_error);
  EXPECT_EQ(back.path_point, u.path_point);
  EXPECT_EQ(back.repetition, u.repetition);
  ASSERT_EQ(back.changed.size(), 2U);
  EXPECT_EQ(back.changed[0].index, 3U);
  EXPECT_EQ(back.changed[0].look.scale, 0.5);
  EXPECT_EQ(back.changed[0].look.color, (Rgb{10, 20, 30}));
}

TEST(Messages, HandSampleRoundTripAndSchema) {
  const HandSample s{40.0, Vec3(0.5, 0.25, -0.125)};
  const HandSample back = parse_hand_sample(hand_sample_message(s));
  EXPECT_EQ(back.t_ms, s.t_ms);
  EXPECT_EQ(back.pos, s.pos);
  for (const char* text : {R"({"type":"hand_sample","pos_m":[0,0,0]})", R"({"type":"hand_sample","t_ms":1,"pos_m":[0,0]})",
                           R"({"type":"hand_sample","t_ms":1,"pos_m":[0,"a",0]})",
                           R"({"type":"hand_sample","t_ms":"1","pos_m":[0,0,0]})"}) {
    try {
      parse_hand_sample(Json::parse(text));
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::BadMessage);
    }
  }
}

TEST(Messages, SummaryWritesNonFiniteAsNull) {
  SessionSummary s;
  s.trajectory_id = "T1";
  s.best_errors = {0.01, std::numeric_limits<double>::infinity()};
  const Json m = summary_message(s, std::nullopt, "too short");
  EXPECT_EQ(m.at("best_errors_m")[0], 0.01);
  EXPECT_TRUE(m.at("best_errors_m")[1].is_null());
  EXPECT_TRUE(m.at("analysis").is_null());
  EXPECT_EQ(m.at("analysis_error"), "too short");
}

TEST(Handler, ErrorsKeepTheSessionAlive) {
  const TrajectoryLibrary lib = TrajectoryLibrary::with_exercises();
  SessionHandler h(&lib);
  auto single = [&](const Json& msg) {
    const auto out = h.handle(msg);
    EXPECT_EQ(out.size(), 1U);
    return out.front();
  };
  Json e = single(hand_sample_message({0, Vec3::Zero()}));
  EXPECT_EQ(e.at("type"), "error");
  EXPECT_EQ(e.at("code"), "WrongPhase");

  e = h.handle_line("{\"type\": \"hand_sample\", ").front();
  EXPECT_EQ(e.at("code"), "BadMessage");
  EXPECT_NE(e.at("message").get<std::string>().find("malformed JSON at byte"), std::string::npos);

  EXPECT_EQ(single(Json{{"type", "teleport"}}).at("code"), "BadMessage");
  EXPECT_EQ(single(Json{{"type", "feedback"}}).at("code"), "BadMessage");
  EXPECT_EQ(single(Json::array({1, 2})).at("code"), "BadMessage");
  EXPECT_EQ(single(cmd("dance")).at("code"), "BadMessage");
  EXPECT_EQ(single(Json{{"type", "command"}, {"action", "state"}, {"args", 3}}).at("code"), "BadMessage");

  started(h);
  EXPECT_EQ(h.session().phase(), Phase::Executing);
  EXPECT_EQ(single(cmd("select", {{"id", "T2"}})).at("code"), "WrongPhase");
  EXPECT_EQ(single(cmd("set_mode", {{"mode", "sideways"}})).at("code"), "InvalidArgument");
  const Json fb = single(hand_sample_message({10, generate_exercise(Exercise::T1).via_points[5]}));
  EXPECT_EQ(fb.at("type"), "feedback");
  EXPECT_EQ(fb.at("nearest_index"), 5);
}

TEST(Handler, UnknownTrajectoryAndInlineSelect) {
  const TrajectoryLibrary lib = TrajectoryLibrary::with_exercises();
  SessionHandler h(&lib);
  h.handle(cmd("calibrate", {{"point_m", {0, 0, 0}}}));
  h.handle(cmd("calibrate", {{"point_m", {1, 0, 0}}}));
  h.handle(cmd("calibrate", {{"point_m", {0, 1, 0}}}));
  EXPECT_EQ(h.handle(cmd("select", {{"id", "T9"}})).front().at("code"), "UnknownTrajectory");
  const Trajectory line = straight_line(0.2, 0.01, "line");
  const auto out = h.handle(cmd("select", {{"trajectory", trajectory_to_json(line)}}));
  ASSERT_EQ(out.size(), 1U);
  EXPECT_EQ(out[0].at("type"), "state");
  EXPECT_EQ(out[0].at("trajectory").at("id"), "line");
  EXPECT_EQ(h.exercise_label(), "line");
}

TEST(Handler, StateMessageFields) {
  const TrajectoryLibrary lib = TrajectoryLibrary::with_exercises();
  SessionHandler h(&lib);
  Json s = h.handle(cmd("state")).front();
  EXPECT_EQ(s.at("phase"), "calibrating");
  EXPECT_TRUE(s.at("frame").is_null());
  EXPECT_TRUE(s.at("trajectory").is_null());

  h.handle(cmd("calibrate", {{"point_m", {1, 2, 3}}}));
  h.handle(cmd("calibrate", {{"point_m", {2, 2, 3}}}));
  s = h.handle(cmd("calibrate", {{"point_m", {1, 3, 3}}})).back();
  EXPECT_EQ(s.at("phase"), "selecting");
  EXPECT_EQ(s.at("calibration_points_m").size(), 3U);
  EXPECT_EQ(s.at("frame").at("origin_m"), Json::array({1.0, 2.0, 3.0}));
  EXPECT_EQ(s.at("frame").at("axes").size(), 3U);

  h.handle(cmd("select", {{"id", "T4"}}));
  h.handle(cmd("set_ci", {{"ci", "C3"}}));
  s = h.handle(cmd("place_move", {{"dx_m", 0.1}})).back();
  EXPECT_EQ(s.at("ci"), "C3");
  EXPECT_DOUBLE_EQ(s.at("ci_diameter_m").get<double>(), diameter(ConfidenceInterval::C3));
  EXPECT_EQ(s.at("placement_m")[0], 0.1);
  const Trajectory placed = trajectory_from_json(s.at("trajectory"));
  EXPECT_EQ(placed.via_points.front(), generate_exercise(Exercise::T4).via_points.front() + Vec3(0.1, 0, 0));
  EXPECT_EQ(s.at("mode"), "overwrite");
  EXPECT_EQ(s.at("repetitions"), 0);
}

TEST(Handler, StartReplyPaintsEverySphere) {
  const TrajectoryLibrary lib = TrajectoryLibrary::with_exercises();
  SessionHandler h(&lib);
  h.handle(cmd("calibrate", {{"point_m", {0, 0, 0}}}));
  h.handle(cmd("calibrate", {{"point_m", {1, 0, 0}}}));
  h.handle(cmd("calibrate", {{"point_m", {0, 1, 0}}}));
  h.handle(cmd("select", {{"id", "T2"}}));
  const auto out = h.handle(cmd("start", {{"subject", "s"}, {"condition", "no"}}));
  ASSERT_EQ(out.size(), 2U);
  EXPECT_EQ(out[0].at("spheres").size(), generate_exercise(Exercise::T2).via_points.size());
  EXPECT_EQ(out[1].at("phase"), "executing");
  EXPECT_EQ(h.subject(), "s");
  EXPECT_EQ(h.condition(), Condition::NoFeedback);
}

TEST(Handler, BadStartMetadataLeavesSessionUntouched) {
  const TrajectoryLibrary lib = TrajectoryLibrary::with_exercises();
  SessionHandler h(&lib);
  h.handle(cmd("calibrate", {{"point_m", {0, 0, 0}}}));
  h.handle(cmd("calibrate", {{"point_m", {1, 0, 0}}}));
  h.handle(cmd("calibrate", {{"point_m", {0, 1, 0}}}));
  h.handle(cmd("select", {{"id", "T2"}}));
  EXPECT_EQ(h.handle(cmd("start", {{"condition", "c7"}})).front().at("type"), "error");
  EXPECT_EQ(h.session().phase(), Phase::Selecting);
}

TEST(SessionLog, RecordRoundTrip) {
  const LogRecord r{12.5, "tcp-3", LogDirection::Out, Json{{"type", "state"}, {"phase", "selecting"}}};
  const std::string line = to_jsonl(r);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  const LogRecord back = parse_log_record(line);
  EXPECT_EQ(back.server_ts_ms, r.server_ts_ms);
  EXPECT_EQ(back.session, r.session);
  EXPECT_EQ(back.dir, r.dir);
  EXPECT_EQ(back.msg, r.msg);
}

TEST(SessionLog, BadRecordsNameTheLine) {
  std::stringstream in(to_jsonl({1, "a", LogDirection::In, Json::object()}) + "\n{\"session\":\"a\"}\n");
  try {
    read_session_log(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaViolation);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(SessionLog, RecorderReplaysIdentically) {
  const TrajectoryLibrary lib = TrajectoryLibrary::with_exercises();
  const HandlerSettings settings{&lib, {}, {}};
  SessionRecorder a("a", settings), b("b", settings);
  double clock = 0;
  for (const std::string& line : read_lines(kData + "/conversation_in.jsonl")) {
    a.send(Json::parse(line), clock += 1);
  }
  // A malformed line is logged as a string and replays to the same error.
  b.send(Json("{\"type\":"), clock += 1);
  b.send(hand_sample_message({0, Vec3::Zero()}), clock += 1);

  std::vector<LogRecord> all;
  // Interleave so replay has to separate the sessions.
  std::size_t i = 0, j = 0;
  while (i < a.records().size() || j < b.records().size()) {
    if (i < a.records().size()) all.push_back(a.records()[i++]);
    if (j < b.records().size()) all.push_back(b.records()[j++]);
  }
  EXPECT_EQ(session_ids(all), (std::vector<std::string>{"a", "b"}));
  std::stringstream buf;
  write_session_log(buf, all);
  const auto reread = read_session_log(buf);
  ASSERT_EQ(reread.size(), all.size());
  EXPECT_TRUE(reread[1].msg.is_string());

  const ReplayReport ok = verify_replay(reread, settings);
  EXPECT_TRUE(ok.identical) << ok.mismatch;
  EXPECT_EQ(ok.sessions, 2U);
  EXPECT_EQ(ok.inbound, 58U + 2U);

  auto tampered = reread;
  for (LogRecord& r : tampered) {
    if (r.dir == LogDirection::Out && r.msg.at("type") == "feedback") {
      r.msg["current_error_m"] = 99.0;
      break;
    }
  }
  const ReplayReport bad = verify_replay(tampered, settings);
  EXPECT_FALSE(bad.identical);
  EXPECT_FALSE(bad.mismatch.empty());

  const auto handler = replay_session(reread, "a", settings);
  EXPECT_EQ(handler->session().phase(), a.handler().session().phase());
  EXPECT_EQ(handler->session().tracked_path().size(), a.handler().session().tracked_path().size());
}
