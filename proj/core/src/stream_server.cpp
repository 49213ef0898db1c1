#include "microtele/stream_server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace microtele::stream {

namespace {

constexpr std::size_t kMaxLine = 1 << 20;

enum class ReadResult { Line, Timeout, Eof };

/// Extracts one line from `buffer`, reading from `fd` as needed.
ReadResult read_line(int fd, std::string& buffer, std::string& line, std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (const auto nl = buffer.find('\n'); nl != std::string::npos) {
      line = buffer.substr(0, nl);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      buffer.erase(0, nl + 1);
      return ReadResult::Line;
    }
    if (buffer.size() > kMaxLine) return ReadResult::Eof;
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return ReadResult::Timeout;
    pollfd p{fd, POLLIN, 0};
    const int r = ::poll(&p, 1, static_cast<int>(left.count()));
    if (r < 0) {
      if (errno == EINTR) continue;
      return ReadResult::Eof;
    }
    if (r == 0) return ReadResult::Timeout;
    char chunk[4096];
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) {
      if (n < 0 && (errno == EINTR || errno == EAGAIN)) continue;
      return ReadResult::Eof;
    }
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

bool send_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

/// Serialized writes from the reader and writer threads of a connection.
class Outbox {
 public:
  explicit Outbox(int fd) : fd_(fd) {}
  bool send(const Message& m) {
    std::lock_guard lock(mutex_);
    if (broken_) return false;
    if (!send_all(fd_, encode(m) + "\n")) broken_ = true;
    return !broken_;
  }

 private:
  int fd_;
  std::mutex mutex_;
  bool broken_ = false;
};

}  // namespace

FrameDecimator::FrameDecimator(double max_rate) : period_(1.0 / max_rate) {
  if (!(max_rate > 0.0)) throw ConfigurationError("frame rate must be positive");
}

bool FrameDecimator::admit(double t) {
  if (last_ && t - *last_ < period_) return false;
  last_ = t;
  return true;
}

void CommandMailbox::post(const Command& cmd) {
  std::lock_guard lock(mutex_);
  latest_ = cmd;
}

std::optional<Command> CommandMailbox::take() {
  std::lock_guard lock(mutex_);
  std::optional<Command> out;
  out.swap(latest_);
  return out;
}

Delivery Subscription::wait(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout, [&] { return frame_ || !events_.empty() || closed_; });
  Delivery d;
  d.frame = std::move(frame_);
  frame_.reset();
  d.events.swap(events_);
  d.closed = closed_;
  return d;
}

template <class F>
void FrameBroadcaster::each(F f) {
  std::vector<std::shared_ptr<Subscription>> live;
  {
    std::lock_guard lock(mutex_);
    std::erase_if(subs_, [](const auto& w) { return w.expired(); });
    for (const auto& w : subs_) {
      if (auto s = w.lock()) live.push_back(std::move(s));
    }
  }
  for (const auto& s : live) {
    {
      std::lock_guard lock(s->mutex_);
      f(*s);
    }
    s->cv_.notify_all();
  }
}

std::shared_ptr<Subscription> FrameBroadcaster::subscribe() {
  auto s = std::make_shared<Subscription>();
  std::lock_guard lock(mutex_);
  if (closed_) s->closed_ = closed_;
  subs_.push_back(s);
  return s;
}

void FrameBroadcaster::publish(FrameSnapshot frame) {
  each([&](Subscription& s) { s.frame_ = frame; });
}

void FrameBroadcaster::publish(const TeleopEvent& event) {
  each([&](Subscription& s) { s.events_.push_back(event); });
}

void FrameBroadcaster::close(const std::string& reason) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    closed_ = reason;
  }
  each([&](Subscription& s) { s.closed_ = reason; });
}

std::size_t FrameBroadcaster::subscribers() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& w : subs_) n += w.expired() ? 0 : 1;
  return n;
}

StreamSession::StreamSession(const ScenarioConfig& config, double speed)
    : session_(config.teleop), speed_(speed) {
  if (!(speed >= 0.0)) throw ConfigurationError("speed must be non-negative");
  current_.pose = config.teleop.master_initial;
}

FrameSnapshot StreamSession::tick() {
  if (auto cmd = mailbox_.take()) current_ = operator_command(*cmd);
  auto frame = std::make_shared<const TelemetryFrame>(session_.step(current_));
  broadcaster_.publish(frame);
  const auto& events = session_.events();
  for (; events_seen_ < events.size(); ++events_seen_) broadcaster_.publish(events[events_seen_]);
  return frame;
}

void StreamSession::run(const std::atomic<bool>& stop) {
  const auto start = std::chrono::steady_clock::now();
  const double t0 = session_.time();
  std::string reason = "session stopped";
  try {
    while (!stop.load()) {
      tick();
      if (speed_ > 0.0) {
        const auto due = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                     std::chrono::duration<double>((session_.time() - t0) / speed_));
        std::this_thread::sleep_until(due);
      }
    }
  } catch (const SimulationFault& e) {
    const auto& events = session_.events();
    for (; events_seen_ < events.size(); ++events_seen_) broadcaster_.publish(events[events_seen_]);
    reason = std::string("fault: ") + e.what();
  }
  broadcaster_.close(reason);
}

StreamServer::StreamServer(ServerOptions options) : options_(std::move(options)) {
  if (!(options_.speed >= 0.0)) throw ConfigurationError("speed must be non-negative");
  if (!(options_.max_frame_rate > 0.0)) throw ConfigurationError("max_frame_rate must be positive");
}

StreamServer::~StreamServer() { stop(); }

void StreamServer::start() {
  if (listen_fd_ >= 0) return;
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw Error(std::string("socket: ") + std::strerror(errno));
  const int yes = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(options_.port);
  if (::inet_pton(AF_INET, options_.bind.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw ConfigurationError("bad bind address '" + options_.bind + "'");
  }
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(fd, 16) < 0) {
    const std::string err = std::strerror(errno);
    ::close(fd);
    throw Error("cannot listen on " + options_.bind + ":" + std::to_string(options_.port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  listen_fd_ = fd;
  stopping_ = false;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void StreamServer::stop() {
  if (listen_fd_ < 0) return;
  stopping_ = true;
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  listen_fd_ = -1;
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(conn_mutex_);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    threads.swap(connections_);
  }
  for (auto& t : threads) t.join();
}

void StreamServer::accept_loop() {
  while (!stopping_) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 100) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int yes = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
    std::lock_guard lock(conn_mutex_);
    open_fds_.push_back(fd);
    connections_.emplace_back([this, fd] { serve(fd); });
  }
}

void StreamServer::serve(int fd) {
  Outbox out(fd);
  std::string buffer;
  std::string line;

  auto finish = [&] {
    {
      std::lock_guard lock(conn_mutex_);
      std::erase(open_fds_, fd);
    }
    ::shutdown(fd, SHUT_RDWR);
    ::close(fd);
  };

  std::optional<ScenarioConfig> config;
  if (read_line(fd, buffer, line, options_.handshake_timeout) != ReadResult::Line) {
    out.send(Close{"expected hello"});
    finish();
    return;
  }
  try {
    const Message m = decode(line);
    const auto* hello = std::get_if<Hello>(&m);
    if (!hello) throw ProtocolError("expected hello");
    if (hello->proto != kProtocolVersion) {
      throw ProtocolError("unsupported protocol version " + std::to_string(hello->proto) + " (server speaks " +
                          std::to_string(kProtocolVersion) + ")");
    }
    if (const auto it = options_.scenarios.find(hello->scenario); it != options_.scenarios.end()) {
      config = it->second;
    } else {
      config = default_scenario(scenario_from_name(hello->scenario));
    }
  } catch (const Error& e) {
    out.send(Close{e.what()});
    finish();
    return;
  }

  ++sessions_started_;
  StreamSession session(*config, options_.speed);
  auto sub = session.broadcaster().subscribe();
  out.send(Hello{kProtocolVersion, std::string(scenario_name(config->kind))});

  std::atomic<bool> halt{false};
  std::atomic<bool> writer_done{false};
  std::thread sim([&] { session.run(halt); });
  std::thread writer([&] {
    FrameDecimator decimator(options_.max_frame_rate);
    for (;;) {
      Delivery d = sub->wait(std::chrono::milliseconds(50));
      bool ok = true;
      for (const TeleopEvent& e : d.events) ok = ok && out.send(event_message(e));
      if (d.frame && decimator.admit(d.frame->t)) ok = ok && out.send(frame_message(*d.frame));
      if (d.closed) {
        out.send(Close{*d.closed});
        break;
      }
      if (!ok) break;
    }
    writer_done = true;
  });

  std::string close_reason = "client closed";
  while (!stopping_ && !writer_done) {
    const ReadResult r = read_line(fd, buffer, line, std::chrono::milliseconds(100));
    if (r == ReadResult::Timeout) continue;
    if (r == ReadResult::Eof) break;
    try {
      const Message m = decode(line);
      if (const auto* cmd = std::get_if<Command>(&m)) {
        session.mailbox().post(*cmd);
      } else if (std::holds_alternative<Close>(m)) {
        break;
      } else {
        throw ProtocolError("unexpected message from client");
      }
    } catch (const ProtocolError& e) {
      close_reason = std::string("protocol error: ") + e.what();
      break;
    }
  }
  if (stopping_) close_reason = "server shutting down";

  session.broadcaster().close(close_reason);  // first close wins, so this goes before the sim's own
  halt = true;
  sim.join();
  writer.join();
  finish();
}

StreamClient::~StreamClient() { close(); }

void StreamClient::connect(const std::string& host, std::uint16_t port) {
  close();
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
    throw Error("cannot resolve '" + host + "'");
  }
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0 || ::connect(fd, res->ai_addr, res->ai_addrlen) < 0) {
    const std::string err = std::strerror(errno);
    if (fd >= 0) ::close(fd);
    ::freeaddrinfo(res);
    throw Error("cannot connect to " + host + ":" + std::to_string(port) + ": " + err);
  }
  ::freeaddrinfo(res);
  const int yes = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
  fd_ = fd;
  eof_ = false;
  buffer_.clear();
}

void StreamClient::send(const Message& message) { send_raw(encode(message)); }

void StreamClient::send_raw(const std::string& line) {
  if (fd_ < 0 || !send_all(fd_, line + "\n")) throw Error("stream client: send failed");
}

std::optional<Message> StreamClient::receive(std::chrono::milliseconds timeout) {
  if (fd_ < 0) return std::nullopt;
  std::string line;
  switch (read_line(fd_, buffer_, line, timeout)) {
    case ReadResult::Line:
      return decode(line);
    case ReadResult::Eof:
      eof_ = true;
      return std::nullopt;
    case ReadResult::Timeout:
      return std::nullopt;
  }
  return std::nullopt;
}

void StreamClient::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

}  // namespace microtele::stream
