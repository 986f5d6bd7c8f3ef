#include "kinetunnel/server.hpp"

#include "kinetunnel/session_log.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <sys/socket.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace kinetunnel {

namespace {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

constexpr std::size_t kMaxLine = 1 << 20;

double now_ms() {
  using namespace std::chrono;
  return static_cast<double>(duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count());
}

// Append-only writer fed by every connection.
class LogSink {
 public:
  void open(const std::string& path) {
    out_.open(path, std::ios::app | std::ios::binary);
    if (!out_) throw Error(ErrorCode::InvalidArgument, "cannot open log " + path);
    worker_ = std::thread([this] { run(); });
  }

  void push(const LogRecord& record) {
    if (!worker_.joinable()) return;
    std::string line = to_jsonl(record);
    {
      std::lock_guard lock(mutex_);
      queue_.push_back(std::move(line));
    }
    cv_.notify_one();
  }

  void close() {
    if (!worker_.joinable()) return;
    {
      std::lock_guard lock(mutex_);
      closing_ = true;
    }
    cv_.notify_one();
    worker_.join();
    out_.flush();
  }

 private:
  void run() {
    std::unique_lock lock(mutex_);
    for (;;) {
      cv_.wait(lock, [this] { return closing_ || !queue_.empty(); });
      std::deque<std::string> batch;
      batch.swap(queue_);
      const bool done = closing_;
      lock.unlock();
      for (const std::string& line : batch) out_ << line << '\n';
      out_.flush();
      lock.lock();
      if (done && queue_.empty()) return;
    }
  }

  std::ofstream out_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::string> queue_;
  bool closing_ = false;
  std::thread worker_;
};

// Slows a sender to `rate` messages per second with a small burst allowance.
class TokenBucket {
 public:
  explicit TokenBucket(double rate)
      : rate_(rate), burst_(std::max(1.0, rate * 0.25)), tokens_(burst_),
        last_(std::chrono::steady_clock::now()) {}

  void acquire() {
    refill();
    if (tokens_ < 1.0) {
      const double wait_s = (1.0 - tokens_) / rate_;
      std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
      refill();
    }
    tokens_ -= 1.0;
  }

 private:
  void refill() {
    const auto now = std::chrono::steady_clock::now();
    const double elapsed = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    tokens_ = std::min(burst_, tokens_ + elapsed * rate_);
  }

  double rate_;
  double burst_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
};

}  // namespace

struct Server::Impl {
  ServiceConfig config;
  TrajectoryLibrary library;
  asio::io_context io;
  std::unique_ptr<tcp::acceptor> tcp_acceptor;
  std::unique_ptr<tcp::acceptor> ws_acceptor;
  std::thread io_thread;
  LogSink log;

  std::mutex mutex;
  std::condition_variable stopped_cv;
  bool running = false;
  bool stopped = false;
  std::vector<std::thread> connections;
  std::map<std::size_t, int> live_sockets;
  std::atomic<std::size_t> accepted{0};
  std::uint16_t tcp_port = 0;
  std::uint16_t ws_port = 0;

  Impl(ServiceConfig c, TrajectoryLibrary l) : config(std::move(c)), library(std::move(l)) {}

  struct Conversation {
    std::size_t key;
    std::string id;
    SessionHandler handler;
    TokenBucket bucket;
  };

  // Handles one inbound line and returns the outbound lines.
  std::vector<std::string> exchange(Conversation& conv, std::string_view line) {
    const double ts = now_ms();
    Json parsed;
    bool ok = true;
    try {
      parsed = Json::parse(line.begin(), line.end());
    } catch (const nlohmann::json::parse_error&) {
      ok = false;
    }
    if (ok && parsed.is_object()) {
      const auto type = parsed.find("type");
      if (type != parsed.end() && *type == "hand_sample") conv.bucket.acquire();
    }
    const std::vector<Json> replies = ok ? conv.handler.handle(parsed) : conv.handler.handle_line(line);
    log.push({ts, conv.id, LogDirection::In, ok ? parsed : Json(std::string(line))});
    std::vector<std::string> out;
    out.reserve(replies.size());
    for (const Json& r : replies) {
      log.push({ts, conv.id, LogDirection::Out, r});
      out.push_back(dump_line(r));
    }
    return out;
  }

  Conversation open_conversation(const char* prefix) {
    const std::size_t n = ++accepted;
    HandlerSettings s{&library, config.feedback, config.analysis};
    return Conversation{n, std::string(prefix) + std::to_string(n),
                        SessionHandler(s.library, s.feedback, s.analysis),
                        TokenBucket(config.server.max_sample_rate_hz)};
  }

  void track(std::size_t key, int fd) {
    std::lock_guard lock(mutex);
    live_sockets[key] = fd;
    if (stopped) ::shutdown(fd, SHUT_RDWR);
  }

  void untrack(std::size_t key) {
    std::lock_guard lock(mutex);
    live_sockets.erase(key);
  }

  void serve_tcp(tcp::socket socket) {
    Conversation conv = open_conversation("tcp-");
    const std::size_t key = conv.key;
    track(key, socket.native_handle());
    asio::streambuf buffer(kMaxLine);
    boost::system::error_code ec;
    for (;;) {
      const std::size_t n = asio::read_until(socket, buffer, '\n', ec);
      if (ec == asio::error::not_found) {
        const std::string reply = dump_line(error_message(ErrorCode::BadMessage, "line too long")) + "\n";
        asio::write(socket, asio::buffer(reply), ec);
        break;
      }
      if (ec) break;
      std::string line(asio::buffers_begin(buffer.data()), asio::buffers_begin(buffer.data()) + n);
      buffer.consume(n);
      while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      std::string reply;
      for (const std::string& r : exchange(conv, line)) reply += r + "\n";
      asio::write(socket, asio::buffer(reply), ec);
      if (ec) break;
    }
    untrack(key);
    socket.close(ec);
  }

  void serve_ws(tcp::socket socket) {
    Conversation conv = open_conversation("ws-");
    const std::size_t key = conv.key;
    track(key, socket.native_handle());
    try {
      websocket::stream<tcp::socket> ws(std::move(socket));
      ws.read_message_max(kMaxLine);
      ws.accept();
      ws.text(true);
      for (;;) {
        beast::flat_buffer buffer;
        ws.read(buffer);
        const std::string frame = beast::buffers_to_string(buffer.data());
        // A frame normally holds one message; newline-separated batches are accepted too.
        std::size_t pos = 0;
        while (pos <= frame.size()) {
          const auto nl = frame.find('\n', pos);
          std::string line = frame.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
          pos = nl == std::string::npos ? frame.size() + 1 : nl + 1;
          if (!line.empty() && line.back() == '\r') line.pop_back();
          if (line.find_first_not_of(" \t") == std::string::npos) continue;
          for (const std::string& r : exchange(conv, line)) ws.write(asio::buffer(r));
        }
      }
    } catch (const std::exception&) {
      // Peer went away or the server is stopping.
    }
    untrack(key);
  }

  template <class Serve>
  void accept_loop(tcp::acceptor& acceptor, Serve serve) {
    acceptor.async_accept([this, &acceptor, serve](boost::system::error_code ec, tcp::socket socket) {
      if (ec) return;
      {
        std::lock_guard lock(mutex);
        if (stopped) return;
        connections.emplace_back([this, serve, s = std::move(socket)]() mutable { (this->*serve)(std::move(s)); });
      }
      accept_loop(acceptor, serve);
    });
  }

  std::unique_ptr<tcp::acceptor> listen(std::uint16_t port) {
    const tcp::endpoint ep(asio::ip::make_address(config.server.host), port);
    auto acceptor = std::make_unique<tcp::acceptor>(io);
    acceptor->open(ep.protocol());
    acceptor->set_option(asio::socket_base::reuse_address(true));
    acceptor->bind(ep);
    acceptor->listen();
    return acceptor;
  }
};

Server::Server(ServiceConfig config, TrajectoryLibrary library)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(library))) {}

Server::~Server() { stop(); }

void Server::start() {
  Impl& m = *impl_;
  if (m.running) return;
  if (!m.config.server.log_path.empty()) m.log.open(m.config.server.log_path);
  m.tcp_acceptor = m.listen(m.config.server.tcp_port);
  m.tcp_port = m.tcp_acceptor->local_endpoint().port();
  m.accept_loop(*m.tcp_acceptor, &Impl::serve_tcp);
  if (m.config.server.websocket) {
    m.ws_acceptor = m.listen(m.config.server.ws_port);
    m.ws_port = m.ws_acceptor->local_endpoint().port();
    m.accept_loop(*m.ws_acceptor, &Impl::serve_ws);
  }
  m.running = true;
  m.io_thread = std::thread([&m] { m.io.run(); });
}

void Server::stop() {
  Impl& m = *impl_;
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(m.mutex);
    if (!m.running || m.stopped) return;
    m.stopped = true;
    // Unblocks the connection threads' pending reads.
    for (const auto& [key, fd] : m.live_sockets) ::shutdown(fd, SHUT_RDWR);
  }
  m.io.stop();
  if (m.io_thread.joinable()) m.io_thread.join();
  boost::system::error_code ec;
  if (m.tcp_acceptor) m.tcp_acceptor->close(ec);
  if (m.ws_acceptor) m.ws_acceptor->close(ec);
  {
    std::lock_guard lock(m.mutex);
    for (const auto& [key, fd] : m.live_sockets) ::shutdown(fd, SHUT_RDWR);
    threads.swap(m.connections);
  }
  for (std::thread& t : threads) t.join();
  m.log.close();
  m.stopped_cv.notify_all();
}

void Server::wait() {
  std::unique_lock lock(impl_->mutex);
  impl_->stopped_cv.wait(lock, [this] { return impl_->stopped; });
}

std::uint16_t Server::tcp_port() const { return impl_->tcp_port; }

std::uint16_t Server::ws_port() const { return impl_->ws_port; }

std::size_t Server::connections_accepted() const { return impl_->accepted.load(); }

}  // namespace kinetunnel
