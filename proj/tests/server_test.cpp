#include "kinetunnel/protocol.hpp"
#include "kinetunnel/server.hpp"
#include "kinetunnel/session_log.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <thread>

using namespace kinetunnel;
namespace asio = boost::asio;
namespace beast = boost::beast;
using asio::ip::tcp;
namespace fs = std::filesystem;

namespace {

class LineClient {
 public:
  explicit LineClient(std::uint16_t port) : socket_(io_) {
    socket_.connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), port));
  }

  void send(const Json& msg) { send_raw(dump_line(msg)); }
  void send_raw(const std::string& line) { asio::write(socket_, asio::buffer(line + "\n")); }

  Json read() {
    const std::size_t n = asio::read_until(socket_, buffer_, '\n');
    std::string line(asio::buffers_begin(buffer_.data()), asio::buffers_begin(buffer_.data()) + n);
    buffer_.consume(n);
    return Json::parse(line);
  }

  // Reads replies until the state message that ends a command reply.
  std::vector<Json> read_until_state() {
    std::vector<Json> out;
    do {
      out.push_back(read());
    } while (out.back().at("type") != "state" && out.back().at("type") != "error");
    return out;
  }

  std::vector<Json> command(std::string_view action, Json args = Json::object()) {
    send(command_message(action, std::move(args)));
    return read_until_state();
  }

 private:
  asio::io_context io_;
  tcp::socket socket_;
  asio::streambuf buffer_;
};

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("kinetunnel_server_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    ServiceConfig cfg;
    cfg.server.tcp_port = 0;
    cfg.server.ws_port = 0;
    cfg.server.max_sample_rate_hz = 2000.0;
    cfg.server.log_path = (dir_ / "log.jsonl").string();
    server_ = std::make_unique<Server>(cfg, TrajectoryLibrary::with_exercises());
    server_->start();
  }

  void TearDown() override {
    server_.reset();
    fs::remove_all(dir_);
  }

  std::vector<LogRecord> stop_and_read_log() {
    server_->stop();
    return load_session_log(dir_ / "log.jsonl");
  }

  template <class Client>
  static void prepare(Client& c, double x0) {
    c.command("calibrate", {{"point_m", {x0, 0, 0}}});
    c.command("calibrate", {{"point_m", {x0 + 1, 0, 0}}});
    c.command("calibrate", {{"point_m", {x0, 1, 0}}});
    c.command("select", {{"id", "T1"}});
    c.command("start", {{"subject", "s"}});
  }

  fs::path dir_;
  std::unique_ptr<Server> server_;
};

}  // namespace

TEST_F(ServerTest, ListensOnEphemeralPorts) {
  EXPECT_NE(server_->tcp_port(), 0);
  EXPECT_NE(server_->ws_port(), 0);
  EXPECT_NE(server_->tcp_port(), server_->ws_port());
}

TEST_F(ServerTest, ErrorsDoNotCloseTheConnection) {
  LineClient c(server_->tcp_port());
  c.send(hand_sample_message({0, Vec3::Zero()}));
  Json e = c.read();
  EXPECT_EQ(e.at("type"), "error");
  EXPECT_EQ(e.at("code"), "WrongPhase");
  c.send_raw("{not json");
  e = c.read();
  EXPECT_EQ(e.at("code"), "BadMessage");
  const auto state = c.command("state");
  ASSERT_EQ(state.size(), 1U);
  EXPECT_EQ(state[0].at("phase"), "calibrating");
}

TEST_F(ServerTest, ConcurrentClientsAreIsolated) {
  LineClient a(server_->tcp_port());
  LineClient b(server_->tcp_port());
  prepare(a, 0.0);
  EXPECT_EQ(b.command("state").back().at("phase"), "calibrating");
  prepare(b, 10.0);

  const Trajectory t1 = generate_exercise(Exercise::T1);
  for (int i = 0; i < 20; ++i) {
    a.send(hand_sample_message({i * 10.0, t1.via_points[static_cast<std::size_t>(i)]}));
    b.send(hand_sample_message({i * 10.0, t1.via_points[0] + Vec3(0, 0, 0.2)}));
  }
  for (int i = 0; i < 20; ++i) {
    const Json fa = a.read();
    const Json fb = b.read();
    EXPECT_EQ(fa.at("nearest_index"), i);
    EXPECT_EQ(fa.at("current_error_m"), 0.0);
    EXPECT_EQ(fb.at("nearest_index"), 0);
    EXPECT_NEAR(fb.at("current_error_m").get<double>(), 0.2, 1e-12);
  }
  EXPECT_EQ(a.command("stop").front().at("type"), "summary");

  const auto log = stop_and_read_log();
  const auto ids = session_ids(log);
  ASSERT_EQ(ids.size(), 2U);
  for (const std::string& id : ids) EXPECT_EQ(id.rfind("tcp-", 0), 0U) << id;
  std::size_t samples_a = 0;
  for (const LogRecord& r : log) {
    if (r.session == ids[0] && r.dir == LogDirection::In && r.msg.at("type") == "hand_sample") ++samples_a;
  }
  EXPECT_EQ(samples_a, 20U);
  const TrajectoryLibrary lib = TrajectoryLibrary::with_exercises();
  const ReplayReport report = verify_replay(log, HandlerSettings{&lib, {}, {}});
  EXPECT_TRUE(report.identical) << report.mismatch;
  EXPECT_EQ(report.sessions, 2U);
}

TEST_F(ServerTest, BurstsAreSlowedNotDropped) {
  LineClient c(server_->tcp_port());
  prepare(c, 0.0);
  const std::size_t n = 1500;
  std::thread writer([&] {
    for (std::size_t i = 0; i < n; ++i) c.send(hand_sample_message({static_cast<double>(i), Vec3::Zero()}));
  });
  const auto start = std::chrono::steady_clock::now();
  std::size_t received = 0;
  for (; received < n; ++received) {
    const Json m = c.read();
    ASSERT_EQ(m.at("type"), "feedback");
    ASSERT_EQ(m.at("t_ms"), static_cast<double>(received));
  }
  writer.join();
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(received, n);
  // 1500 samples at 2000/s with a 500 sample burst take at least half a second.
  EXPECT_GT(seconds, 0.4);
}

TEST_F(ServerTest, WebSocketConversation) {
  asio::io_context io;
  beast::websocket::stream<tcp::socket> ws(io);
  ws.next_layer().connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), server_->ws_port()));
  ws.handshake("127.0.0.1", "/");
  ws.text(true);
  auto read_one = [&] {
    beast::flat_buffer buf;
    ws.read(buf);
    return Json::parse(beast::buffers_to_string(buf.data()));
  };
  // Commands end with a state message, samples get one feedback message.
  auto exchange = [&](const Json& msg) {
    ws.write(asio::buffer(dump_line(msg)));
    std::vector<Json> out{read_one()};
    while (msg.at("type") == "command" && out.back().at("type") != "state" && out.back().at("type") != "error") {
      out.push_back(read_one());
    }
    return out;
  };
  exchange(command_message("calibrate", {{"point_m", {0, 0, 0}}}));
  exchange(command_message("calibrate", {{"point_m", {1, 0, 0}}}));
  const auto calibrated = exchange(command_message("calibrate", {{"point_m", {0, 1, 0}}}));
  EXPECT_EQ(calibrated.back().at("phase"), "selecting");
  exchange(command_message("select", {{"id", "T3"}}));
  const auto start = exchange(command_message("start", {{"subject", "w"}, {"condition", "c1"}}));
  ASSERT_EQ(start.size(), 2U);
  EXPECT_EQ(start[0].at("type"), "feedback");
  EXPECT_EQ(start[1].at("phase"), "executing");

  const Trajectory t3 = generate_exercise(Exercise::T3);
  const auto fb = exchange(hand_sample_message({0, t3.via_points[4]}));
  ASSERT_EQ(fb.size(), 1U);
  EXPECT_EQ(fb[0].at("nearest_index"), 4);
  const auto stop = exchange(command_message("stop"));
  EXPECT_EQ(stop.front().at("type"), "summary");
  EXPECT_EQ(stop.back().at("phase"), "stopped");
  ws.close(beast::websocket::close_code::normal);

  const auto log = stop_and_read_log();
  ASSERT_EQ(session_ids(log).size(), 1U);
  EXPECT_EQ(session_ids(log)[0].rfind("ws-", 0), 0U);
}

TEST_F(ServerTest, StopClosesOpenConnections) {
  LineClient c(server_->tcp_port());
  c.command("state");
  std::thread waiter([&] { server_->wait(); });
  server_->stop();
  waiter.join();
  EXPECT_THROW(c.read(), boost::system::system_error);
  EXPECT_EQ(server_->connections_accepted(), 1U);
}
