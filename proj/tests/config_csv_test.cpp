#include "kinetunnel/config.hpp"
#include "kinetunnel/csv.hpp"
#include "kinetunnel/error.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace kinetunnel;

namespace {

std::string violation(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaViolation) << e.what();
    return e.what();
  }
  ADD_FAILURE() << "no error thrown";
  return {};
}

}  // namespace

TEST(Config, DefaultsWhenEmpty) {
  const ServiceConfig c = parse_config("# nothing\n\n");
  EXPECT_EQ(c.feedback.scale_min, 0.3);
  EXPECT_EQ(c.feedback.deadband_fraction, 0.2);
  EXPECT_EQ(c.server.tcp_port, 7600);
  EXPECT_EQ(c.analysis.samples, 200U);
  EXPECT_EQ(c.arm.upper_arm_length, 0.30);
}

TEST(Config, ReadsEverySection) {
  const ServiceConfig c = parse_config(R"(
[arm]
upper_arm_m = 0.32   # longer arm
shoulder_origin_m = [0.0, -0.25, 0.3]

[feedback]
scale_min = 0.25
on_path_rgb = [0, 128, 0]
deadband_fraction = 0.1

[exercises]
reach_m = 0.4

[analysis]
samples = 100
snap_to_start = false

[server]
host = "0.0.0.0"
tcp_port = 9000
websocket = false
log_path = "/tmp/x # not a comment.jsonl"
)");
  EXPECT_EQ(c.arm.upper_arm_length, 0.32);
  EXPECT_EQ(c.arm.shoulder_origin, Vec3(0.0, -0.25, 0.3));
  EXPECT_EQ(c.feedback.scale_min, 0.25);
  EXPECT_EQ(c.feedback.on_path, (Rgb{0, 128, 0}));
  EXPECT_EQ(c.feedback.deadband_fraction, 0.1);
  EXPECT_EQ(c.exercises.reach, 0.4);
  EXPECT_EQ(c.analysis.samples, 100U);
  EXPECT_FALSE(c.analysis.segmentation.snap_to_start);
  EXPECT_EQ(c.server.host, "0.0.0.0");
  EXPECT_EQ(c.server.tcp_port, 9000);
  EXPECT_FALSE(c.server.websocket);
  EXPECT_EQ(c.server.log_path, "/tmp/x # not a comment.jsonl");
}

TEST(Config, RenderedDefaultsParseBack) {
  ServiceConfig c;
  c.feedback.scale_min = 0.123456789;
  c.server.log_path = "a \"quoted\" path";
  c.arm.shoulder_origin = Vec3(0.1, -0.2, 0.3);
  const ServiceConfig back = parse_config(render_config(c));
  EXPECT_EQ(back.feedback.scale_min, c.feedback.scale_min);
  EXPECT_EQ(back.server.log_path, c.server.log_path);
  EXPECT_EQ(back.arm.shoulder_origin, c.arm.shoulder_origin);
  EXPECT_EQ(render_config(back), render_config(c));
  EXPECT_NE(render_config(ServiceConfig{}).find("upper_arm_m = 0.3\n"), std::string::npos);
}

TEST(Config, ErrorsNameTheLine) {
  EXPECT_NE(violation([] { parse_config("[feedback]\nscale_min = 0.3\ncolour = 1\n"); }).find("line 3"),
            std::string::npos);
  EXPECT_NE(violation([] { parse_config("[feedback]\nscale_min = \"big\"\n"); }).find("line 2"), std::string::npos);
  EXPECT_NE(violation([] { parse_config("[arm]\nforearm_m = 0.2\nforearm_m = 0.3\n"); }).find("duplicate"),
            std::string::npos);
  EXPECT_NE(violation([] { parse_config("[server]\ntcp_port = 70000\n"); }).find("line 2"), std::string::npos);
  EXPECT_NE(violation([] { parse_config("[arm]\nforearm_m = -1\n"); }).find("positive"), std::string::npos);
  violation([] { parse_config("[arm\n"); });
  violation([] { parse_config("just words\n"); });
  violation([] { parse_config("[arm]\nshoulder_origin_m = [1, 2]\n"); });
  violation([] { parse_config("[feedback]\ndeadband_fraction = 2\n"); });
}

TEST(Config, KeyValueDocumentTypes) {
  const KeyValueDocument doc = KeyValueDocument::parse("a = true\nb = -1.5e-3\nc = \"s\"\n[x]\nd = [1, 2.5]\n");
  EXPECT_EQ(std::get<bool>(doc.values().at("a")), true);
  EXPECT_EQ(std::get<double>(doc.values().at("b")), -1.5e-3);
  EXPECT_EQ(std::get<std::string>(doc.values().at("c")), "s");
  EXPECT_EQ(std::get<std::vector<double>>(doc.values().at("x.d")), (std::vector<double>{1, 2.5}));
  EXPECT_EQ(doc.line_of("x.d"), 5U);
}

TEST(Csv, SplitHandlesQuotes) {
  EXPECT_EQ(split_csv_line("a,\"b,c\",\"d\"\"e\",,f"),
            (std::vector<std::string>{"a", "b,c", "d\"e", "", "f"}));
}

TEST(Csv, ErrRowsRoundTrip) {
  const std::vector<ErrRow> rows{{"s1", "T1", Condition::NoFeedback, ErrorSpace::EndEffector, 0.0228},
                                 {"s,2", "T4", Condition::C3, ErrorSpace::Joint, 1.0 / 3.0}};
  std::stringstream buf;
  write_err_csv(buf, rows);
  EXPECT_EQ(buf.str().substr(0, 36), "subject,exercise,condition,space,err");
  EXPECT_NE(buf.str().find("s1,T1,no,ee,0.0228\n"), std::string::npos);
  const auto back = read_err_csv(buf);
  ASSERT_EQ(back.size(), 2U);
  EXPECT_EQ(back[1].subject, "s,2");
  EXPECT_EQ(back[1].condition, Condition::C3);
  EXPECT_EQ(back[1].space, ErrorSpace::Joint);
  EXPECT_EQ(back[1].err, 1.0 / 3.0);
}

TEST(Csv, ErrRowErrors) {
  std::stringstream bad_header("a,b\n");
  violation([&] { read_err_csv(bad_header); });
  std::stringstream bad_row("subject,exercise,condition,space,err\ns,T1,maybe,ee,1\n");
  EXPECT_NE(violation([&] { read_err_csv(bad_row); }).find("line 2"), std::string::npos);
  std::stringstream bad_number("subject,exercise,condition,space,err\ns,T1,no,ee,abc\n");
  violation([&] { read_err_csv(bad_number); });
}

TEST(Csv, QuestionnairePolarityMarkers) {
  std::stringstream in("subject,PU1+,PU2-,PEOU1\xE2\x88\x92,note\nA,5,1,2,x\nB,4,2,3,y\n");
  const stats::QuestionnaireMatrix m = read_questionnaire_csv(in);
  EXPECT_EQ(m.item_names, (std::vector<std::string>{"PU1", "PU2", "PEOU1"}));
  EXPECT_EQ(m.polarity, (std::vector<stats::Polarity>{stats::Polarity::Positive, stats::Polarity::Negative,
                                                      stats::Polarity::Negative}));
  EXPECT_EQ(m.responses, (std::vector<std::vector<int>>{{5, 1, 2}, {4, 2, 3}}));
  std::stringstream bad("Q1+\n6\n");
  violation([&] { read_questionnaire_csv(bad); });
}

TEST(Csv, PairingMatchesSubjectExerciseAndSpace) {
  const std::vector<ErrRow> rows{
      {"a", "T1", Condition::NoFeedback, ErrorSpace::EndEffector, 2.0},
      {"a", "T1", Condition::C1, ErrorSpace::EndEffector, 1.0},
      {"a", "T1", Condition::C2, ErrorSpace::EndEffector, 1.5},
      {"a", "T1", Condition::C1, ErrorSpace::Joint, 0.5},
      {"b", "T2", Condition::C1, ErrorSpace::EndEffector, 3.0},
  };
  const PairedErr c1 = pair_conditions(rows, Condition::C1);
  ASSERT_EQ(c1.keys.size(), 1U);
  EXPECT_EQ(c1.with_feedback[0], 1.0);
  EXPECT_EQ(c1.baseline[0], 2.0);
  const PairedErr any = pair_any_feedback(rows);
  EXPECT_EQ(any.with_feedback, (std::vector<double>{1.0, 1.5}));
  EXPECT_EQ(any.keys[1], "a/T1/c2/ee");
}
