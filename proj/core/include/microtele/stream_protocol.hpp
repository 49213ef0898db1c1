#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "microtele/teleop.hpp"

namespace microtele::stream {

/// Newline-delimited JSON messages, one object per line.
inline constexpr int kProtocolVersion = 1;
inline constexpr double kMaxFrameRate = 60.0;  // Hz

class ProtocolError : public Error {
 public:
  using Error::Error;
};

struct Hello {
  int proto = kProtocolVersion;
  std::string scenario;

  bool operator==(const Hello&) const = default;
};

/// Client pointer position in master-device meters.
struct Command {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  bool engage = true;

  bool operator==(const Command&) const = default;
};

struct FrameFlags {
  bool saturation = false;
  bool contact = false;
  bool engulfed = false;
  bool adhesion = false;
  bool adhesion_release = false;
  bool current_saturation = false;
  bool penetration = false;
  bool faulted = false;

  static FrameFlags from_bits(std::uint32_t bits);
  std::uint32_t bits() const;
  bool operator==(const FrameFlags&) const = default;
};

struct Frame {
  double t = 0.0;
  Vec3 d = Vec3::Zero();  // slave position
  Vec3 v = Vec3::Zero();  // slave velocity
  double fx = 0.0;        // rendered master force
  double fy = 0.0;
  FrameFlags flags;

  bool operator==(const Frame&) const = default;
};

struct Event {
  double t = 0.0;
  std::string kind;
  std::string detail;

  bool operator==(const Event&) const = default;
};

struct Close {
  std::string reason;

  bool operator==(const Close&) const = default;
};

using Message = std::variant<Hello, Command, Frame, Event, Close>;

/// One line of JSON, no trailing newline.
std::string encode(const Message& message);
/// Throws ProtocolError for malformed JSON, unknown types, missing fields or wrong types.
Message decode(std::string_view line);

Frame frame_message(const TelemetryFrame& frame);
Event event_message(const TeleopEvent& event);
/// Pose (x, y, 0) with zero velocity; the hand spring supplies the damping.
OperatorCommand operator_command(const Command& cmd);

}  // namespace microtele::stream
