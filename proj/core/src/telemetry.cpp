#include "microtele/telemetry.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace microtele {

namespace {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

ojson vec(const Eigen::Ref<const VecX>& v) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

VecX read_vecx(const json& j, const char* key) {
  const json& a = j.at(key);
  VecX v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

template <int N>
Eigen::Matrix<double, N, 1> read_fixed(const json& j, const char* key) {
  const json& a = j.at(key);
  if (a.size() != static_cast<std::size_t>(N)) throw Error(std::string("telemetry: bad length for ") + key);
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = a[static_cast<std::size_t>(i)].get<double>();
  return v;
}

double parse_number(const std::string& field, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (field.empty() || end != field.c_str() + field.size()) {
    throw Error("telemetry line " + std::to_string(line) + ": bad number '" + field + "'");
  }
  return v;
}

}  // namespace

TelemetryFormat format_for_path(const std::string& path) {
  if (ends_with(path, ".csv")) return TelemetryFormat::Csv;
  if (ends_with(path, ".jsonl") || ends_with(path, ".ndjson")) return TelemetryFormat::Jsonl;
  throw ConfigurationError("cannot infer telemetry format from '" + path + "' (use .csv or .jsonl)");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

TelemetryRow csv_row(const TelemetryFrame& f) {
  return {f.t, f.master_position, f.d, f.f_predicted, f.rendered_force, f.flags};
}

TelemetryWriter::TelemetryWriter(std::ostream& out, TelemetryFormat format, std::size_t frames_per_flush)
    : out_(out), format_(format), frames_per_flush_(frames_per_flush) {}

std::size_t TelemetryWriter::put(const std::string& s) {
  out_ << s;
  if (!out_) throw Error("telemetry: write failed");
  bytes_ += s.size();
  return s.size();
}

std::size_t TelemetryWriter::write(const TelemetryFrame& frame) {
  if (frames_ > 0 && !(frame.t > last_t_)) {
    throw Error("telemetry: timestamps must strictly increase (" + format_double(frame.t) + " after " +
                format_double(last_t_) + ")");
  }
  std::size_t n = 0;
  if (frames_ == 0) {
    n += put(format_ == TelemetryFormat::Csv ? std::string(kCsvHeader) + "\n"
                                             : std::string("{\"telemetry\":1,\"format\":\"frames\"}\n"));
  }
  if (format_ == TelemetryFormat::Csv) {
    const TelemetryRow r = csv_row(frame);
    std::string line = format_double(r.t);
    for (const Vec3* v : {&r.q, &r.d, &r.f_est, &r.f_u}) {
      for (int i = 0; i < 3; ++i) line += "," + format_double((*v)[i]);
    }
    line += "," + std::to_string(r.flags) + "\n";
    n += put(line);
  } else {
    n += put(frame_to_json(frame) + "\n");
  }
  last_t_ = frame.t;
  ++frames_;
  if (frames_per_flush_ > 0 && frames_ % frames_per_flush_ == 0) flush();
  return n;
}

void TelemetryWriter::flush() {
  out_.flush();
  if (!out_) throw Error("telemetry: flush failed");
}

std::size_t emit_telemetry(const std::vector<TelemetryFrame>& frames, std::ostream& out, TelemetryFormat format,
                           std::size_t frames_per_flush) {
  if (frames.empty()) throw ConfigurationError("telemetry: no frames to write");
  TelemetryWriter w(out, format, frames_per_flush);
  for (const TelemetryFrame& f : frames) w.write(f);
  w.flush();
  return w.bytes();
}

std::size_t emit_telemetry(const std::vector<TelemetryFrame>& frames, const std::string& path,
                           TelemetryFormat format, std::size_t frames_per_flush) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("telemetry: cannot open '" + path + "' for writing");
  return emit_telemetry(frames, out, format, frames_per_flush);
}

std::vector<TelemetryRow> read_csv_telemetry(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw Error("telemetry: missing or unexpected CSV header");
  std::vector<TelemetryRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 14) throw Error("telemetry line " + std::to_string(lineno) + ": expected 14 fields");
    TelemetryRow r;
    r.t = parse_number(fields[0], lineno);
    for (int i = 0; i < 3; ++i) {
      r.q[i] = parse_number(fields[1 + i], lineno);
      r.d[i] = parse_number(fields[4 + i], lineno);
      r.f_est[i] = parse_number(fields[7 + i], lineno);
      r.f_u[i] = parse_number(fields[10 + i], lineno);
    }
    char* end = nullptr;
    const unsigned long flags = std::strtoul(fields[13].c_str(), &end, 10);
    if (fields[13].empty() || *end != '\0') throw Error("telemetry line " + std::to_string(lineno) + ": bad flags");
    r.flags = static_cast<std::uint32_t>(flags);
    if (!rows.empty() && !(r.t > rows.back().t)) {
      throw Error("telemetry line " + std::to_string(lineno) + ": timestamps out of order");
    }
    rows.push_back(r);
  }
  return rows;
}

std::string frame_to_json(const TelemetryFrame& f) {
  ojson o;
  o["t"] = f.t;
  o["q"] = vec(f.q);
  o["qd"] = vec(f.qd);
  o["master_position"] = vec(f.master_position);
  o["master_velocity"] = vec(f.master_velocity);
  o["d"] = vec(f.d);
  o["d_dot"] = vec(f.d_dot);
  o["reference"] = vec(f.reference);
  o["f_predicted"] = vec(f.f_predicted);
  o["rendered_force"] = vec(f.rendered_force);
  o["desired_force"] = vec(f.desired_force);
  o["commanded_force"] = vec(f.commanded_force);
  o["currents"] = vec(f.currents);
  o["forces"] = {{"drag", vec(f.slave_forces.drag)},
                 {"actuation", vec(f.slave_forces.actuation)},
                 {"contact", vec(f.slave_forces.contact)},
                 {"gravity", vec(f.slave_forces.gravity)},
                 {"external", vec(f.slave_forces.external)}};
  o["contact_force"] = vec(f.contact_force);
  ojson objects = ojson::array();
  for (const Vec3& p : f.object_positions) objects.push_back(vec(p));
  o["object_positions"] = objects;
  o["force_integral"] = vec(f.force_integral);
  o["position_integral"] = vec(f.position_integral);
  o["task_error"] = f.task_error;
  o["master_energy"] = f.master_energy;
  o["flags"] = f.flags;
  return o.dump();
}

TelemetryFrame frame_from_json(const std::string& line) {
  try {
    const json j = json::parse(line);
    TelemetryFrame f;
    f.t = j.at("t").get<double>();
    f.q = read_vecx(j, "q");
    f.qd = read_vecx(j, "qd");
    f.master_position = read_fixed<3>(j, "master_position");
    f.master_velocity = read_fixed<3>(j, "master_velocity");
    f.d = read_fixed<3>(j, "d");
    f.d_dot = read_fixed<3>(j, "d_dot");
    f.reference = read_fixed<3>(j, "reference");
    f.f_predicted = read_fixed<3>(j, "f_predicted");
    f.rendered_force = read_fixed<3>(j, "rendered_force");
    f.desired_force = read_fixed<3>(j, "desired_force");
    f.commanded_force = read_fixed<3>(j, "commanded_force");
    f.currents = read_vecx(j, "currents");
    const json& forces = j.at("forces");
    f.slave_forces.drag = read_fixed<6>(forces, "drag");
    f.slave_forces.actuation = read_fixed<6>(forces, "actuation");
    f.slave_forces.contact = read_fixed<6>(forces, "contact");
    f.slave_forces.gravity = read_fixed<6>(forces, "gravity");
    f.slave_forces.external = read_fixed<6>(forces, "external");
    f.contact_force = read_fixed<3>(j, "contact_force");
    for (const json& p : j.at("object_positions")) {
      if (p.size() != 3) throw Error("telemetry: bad object position");
      f.object_positions.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
    }
    f.force_integral = read_fixed<3>(j, "force_integral");
    f.position_integral = read_fixed<3>(j, "position_integral");
    f.task_error = j.at("task_error").get<double>();
    f.master_energy = j.at("master_energy").get<double>();
    f.flags = j.at("flags").get<std::uint32_t>();
    return f;
  } catch (const json::exception& e) {
    throw Error(std::string("telemetry: malformed frame record: ") + e.what());
  }
}

std::vector<TelemetryFrame> read_jsonl_telemetry(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("telemetry: empty file");
  try {
    const json header = json::parse(line);
    if (!header.is_object() || header.value("telemetry", 0) != 1) throw Error("telemetry: missing JSONL header");
  } catch (const json::exception&) {
    throw Error("telemetry: missing JSONL header");
  }
  std::vector<TelemetryFrame> frames;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    frames.push_back(frame_from_json(line));
    if (frames.size() > 1 && !(frames.back().t > frames[frames.size() - 2].t)) {
      throw Error("telemetry: timestamps out of order");
    }
  }
  return frames;
}

}  // namespace microtele
