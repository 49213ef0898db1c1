#include "microtele/stream_protocol.hpp"

#include <json.hpp>

#include <cmath>

namespace microtele::stream {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

struct FlagName {
  const char* name;
  std::uint32_t bit;
  bool FrameFlags::*member;
};

constexpr FlagName kFlagNames[] = {
    {"saturation", flags::kSaturation, &FrameFlags::saturation},
    {"contact", flags::kContact, &FrameFlags::contact},
    {"engulfed", flags::kEngulfed, &FrameFlags::engulfed},
    {"adhesion", flags::kAdhesion, &FrameFlags::adhesion},
    {"adhesion_release", flags::kAdhesionRelease, &FrameFlags::adhesion_release},
    {"current_saturation", flags::kCurrentSaturation, &FrameFlags::current_saturation},
    {"penetration", flags::kPenetration, &FrameFlags::penetration},
    {"faulted", flags::kFaulted, &FrameFlags::faulted},
};

ojson vec3(const Vec3& v) { return ojson::array({v.x(), v.y(), v.z()}); }

const json& field(const json& j, const char* key) {
  if (!j.contains(key)) throw ProtocolError(std::string("missing field '") + key + "'");
  return j.at(key);
}

double number(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number()) throw ProtocolError(std::string("field '") + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ProtocolError(std::string("field '") + key + "' must be finite");
  return d;
}

std::string text(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_string()) throw ProtocolError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

bool boolean(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_boolean()) throw ProtocolError(std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

std::vector<double> numbers(const json& j, const char* key, std::size_t n) {
  const json& v = field(j, key);
  if (!v.is_array() || v.size() != n) {
    throw ProtocolError(std::string("field '") + key + "' must hold " + std::to_string(n) + " numbers");
  }
  std::vector<double> out;
  for (const json& e : v) {
    if (!e.is_number() || !std::isfinite(e.get<double>())) {
      throw ProtocolError(std::string("field '") + key + "' must hold finite numbers");
    }
    out.push_back(e.get<double>());
  }
  return out;
}

}  // namespace

FrameFlags FrameFlags::from_bits(std::uint32_t bits) {
  FrameFlags f;
  for (const FlagName& n : kFlagNames) f.*n.member = (bits & n.bit) != 0;
  return f;
}

std::uint32_t FrameFlags::bits() const {
  std::uint32_t b = 0;
  for (const FlagName& n : kFlagNames) {
    if (this->*n.member) b |= n.bit;
  }
  return b;
}

std::string encode(const Message& message) {
  ojson o;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Hello>) {
          o["type"] = "hello";
          o["proto"] = m.proto;
          o["scenario"] = m.scenario;
        } else if constexpr (std::is_same_v<T, Command>) {
          o["type"] = "cmd";
          o["t"] = m.t;
          o["pos"] = ojson::array({m.x, m.y});
          o["engage"] = m.engage;
        } else if constexpr (std::is_same_v<T, Frame>) {
          o["type"] = "frame";
          o["t"] = m.t;
          o["slave"] = {{"d", vec3(m.d)}, {"v", vec3(m.v)}};
          o["force"] = ojson::array({m.fx, m.fy});
          ojson f = ojson::object();
          for (const FlagName& n : kFlagNames) f[n.name] = m.flags.*n.member;
          o["flags"] = f;
        } else if constexpr (std::is_same_v<T, Event>) {
          o["type"] = "event";
          o["t"] = m.t;
          o["kind"] = m.kind;
          o["detail"] = m.detail;
        } else {
          o["type"] = "close";
          o["reason"] = m.reason;
        }
      },
      message);
  return o.dump();
}

Message decode(std::string_view line) {
  json j;
  try {
    j = json::parse(line.begin(), line.end());
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed message: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("message must be a JSON object");
  const std::string type = text(j, "type");
  if (type == "hello") {
    const json& p = field(j, "proto");
    if (!p.is_number_integer()) throw ProtocolError("field 'proto' must be an integer");
    return Hello{p.get<int>(), text(j, "scenario")};
  }
  if (type == "cmd") {
    const auto pos = numbers(j, "pos", 2);
    return Command{number(j, "t"), pos[0], pos[1], boolean(j, "engage")};
  }
  if (type == "frame") {
    Frame f;
    f.t = number(j, "t");
    const json& slave = field(j, "slave");
    if (!slave.is_object()) throw ProtocolError("field 'slave' must be an object");
    const auto d = numbers(slave, "d", 3);
    const auto v = numbers(slave, "v", 3);
    f.d = Vec3(d[0], d[1], d[2]);
    f.v = Vec3(v[0], v[1], v[2]);
    const auto force = numbers(j, "force", 2);
    f.fx = force[0];
    f.fy = force[1];
    const json& fl = field(j, "flags");
    if (!fl.is_object()) throw ProtocolError("field 'flags' must be an object");
    for (const FlagName& n : kFlagNames) {
      if (fl.contains(n.name)) f.flags.*n.member = boolean(fl, n.name);
    }
    return f;
  }
  if (type == "event") return Event{number(j, "t"), text(j, "kind"), j.contains("detail") ? text(j, "detail") : ""};
  if (type == "close") return Close{text(j, "reason")};
  throw ProtocolError("unknown message type '" + type + "'");
}

Frame frame_message(const TelemetryFrame& frame) {
  Frame f;
  f.t = frame.t;
  f.d = frame.d;
  f.v = frame.d_dot;
  f.fx = frame.rendered_force.x();
  f.fy = frame.rendered_force.y();
  f.flags = FrameFlags::from_bits(frame.flags);
  return f;
}

Event event_message(const TeleopEvent& event) { return {event.t, event.kind, event.detail}; }

OperatorCommand operator_command(const Command& cmd) {
  OperatorCommand c;
  c.pose = Vec3(cmd.x, cmd.y, 0.0);
  c.engage = cmd.engage;
  return c;
}

}  // namespace microtele::stream
