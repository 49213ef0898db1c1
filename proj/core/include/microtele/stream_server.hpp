#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "microtele/scenarios.hpp"
#include "microtele/stream_protocol.hpp"

namespace microtele::stream {

using FrameSnapshot = std::shared_ptr<const TelemetryFrame>;

/// Passes at most one frame per 1/max_rate of simulated time.
class FrameDecimator {
 public:
  explicit FrameDecimator(double max_rate = kMaxFrameRate);
  bool admit(double t);

 private:
  double period_;
  std::optional<double> last_;
};

/// Holds only the newest operator command; the simulation picks it up at the
/// next tick boundary.
class CommandMailbox {
 public:
  void post(const Command& cmd);
  std::optional<Command> take();

 private:
  std::mutex mutex_;
  std::optional<Command> latest_;
};

/// What a consumer sees on wake-up: the newest frame (if a new one arrived),
/// every event since the last wake-up, and the close reason once closed.
struct Delivery {
  FrameSnapshot frame;
  std::vector<TeleopEvent> events;
  std::optional<std::string> closed;
};

class Subscription {
 public:
  /// Blocks until something is pending or the timeout elapses.
  Delivery wait(std::chrono::milliseconds timeout);

 private:
  friend class FrameBroadcaster;
  std::mutex mutex_;
  std::condition_variable cv_;
  FrameSnapshot frame_;
  std::vector<TeleopEvent> events_;
  std::optional<std::string> closed_;
};

/// One producer, any number of consumers. Frames are shared immutable
/// snapshots; a slow consumer skips frames but never events.
class FrameBroadcaster {
 public:
  std::shared_ptr<Subscription> subscribe();
  void publish(FrameSnapshot frame);
  void publish(const TeleopEvent& event);
  void close(const std::string& reason);
  std::size_t subscribers() const;

 private:
  template <class F>
  void each(F f);

  mutable std::mutex mutex_;
  std::vector<std::weak_ptr<Subscription>> subs_;
  std::optional<std::string> closed_;
};

/// A live teleoperation session driven by streamed commands.
class StreamSession {
 public:
  /// `speed` is simulated seconds per wall second; 0 runs unpaced.
  StreamSession(const ScenarioConfig& config, double speed = 1.0);

  CommandMailbox& mailbox() { return mailbox_; }
  FrameBroadcaster& broadcaster() { return broadcaster_; }

  /// Applies the newest command, steps once, publishes the frame and new events.
  /// Throws SimulationFault.
  FrameSnapshot tick();

  /// Ticks until `stop` is set or a fault occurs; closes the broadcaster on exit.
  void run(const std::atomic<bool>& stop);

  double time() const { return session_.time(); }
  const OperatorCommand& current_command() const { return current_; }

 private:
  TeleopSession session_;
  double speed_;
  CommandMailbox mailbox_;
  FrameBroadcaster broadcaster_;
  OperatorCommand current_;
  std::size_t events_seen_ = 0;
};

struct ServerOptions {
  std::string bind = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks a free port
  double speed = 1.0;      // simulated seconds per wall second, 0 = unpaced
  double max_frame_rate = kMaxFrameRate;
  std::chrono::milliseconds handshake_timeout{5000};
  /// Overrides for scenario names; others fall back to default_scenario.
  std::map<std::string, ScenarioConfig> scenarios;
};

/// TCP server: one thread per connection plus a simulation thread and a frame
/// writer per session.
class StreamServer {
 public:
  explicit StreamServer(ServerOptions options);
  ~StreamServer();
  StreamServer(const StreamServer&) = delete;
  StreamServer& operator=(const StreamServer&) = delete;

  /// Binds and starts accepting. Throws Error when the socket cannot be bound.
  void start();
  void stop();
  std::uint16_t port() const { return port_; }
  std::size_t sessions_started() const { return sessions_started_.load(); }

 private:
  void accept_loop();
  void serve(int fd);

  ServerOptions options_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::atomic<std::size_t> sessions_started_{0};
  std::thread acceptor_;
  std::mutex conn_mutex_;
  std::vector<std::thread> connections_;
  std::vector<int> open_fds_;
};

/// Minimal blocking client, used by tests and tools.
class StreamClient {
 public:
  StreamClient() = default;
  ~StreamClient();
  StreamClient(const StreamClient&) = delete;
  StreamClient& operator=(const StreamClient&) = delete;

  void connect(const std::string& host, std::uint16_t port);
  void send(const Message& message);
  void send_raw(const std::string& line);
  /// Next message, or nullopt on timeout or end of stream.
  std::optional<Message> receive(std::chrono::milliseconds timeout);
  void close();
  bool eof() const { return eof_; }

 private:
  int fd_ = -1;
  std::string buffer_;
  bool eof_ = false;
};

}  // namespace microtele::stream
