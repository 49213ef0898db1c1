#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "microtele/teleop.hpp"

namespace microtele {

enum class TelemetryFormat {
  Csv,    // fixed columns, see kCsvHeader
  Jsonl,  // one full frame per line after a header record
};

inline constexpr const char* kCsvHeader = "t,qx,qy,qz,dx,dy,dz,fx_est,fy_est,fz_est,Fux,Fuy,Fuz,flags";

/// CSV for ".csv" paths, JSONL for ".jsonl"/".ndjson", else throws ConfigurationError.
TelemetryFormat format_for_path(const std::string& path);

/// Shortest form is not guaranteed; 17 significant digits always round-trip.
std::string format_double(double v);

/// Streaming writer. The header goes out with the first frame; timestamps must
/// strictly increase. `frames_per_flush` = 0 leaves flushing to the stream.
class TelemetryWriter {
 public:
  TelemetryWriter(std::ostream& out, TelemetryFormat format, std::size_t frames_per_flush = 0);

  /// Returns the bytes written for this frame (header included on the first call).
  std::size_t write(const TelemetryFrame& frame);
  void flush();
  std::size_t bytes() const { return bytes_; }
  std::size_t frames() const { return frames_; }

 private:
  std::size_t put(const std::string& s);

  std::ostream& out_;
  TelemetryFormat format_;
  std::size_t frames_per_flush_;
  std::size_t bytes_ = 0;
  std::size_t frames_ = 0;
  double last_t_ = 0.0;
};

/// Writes all frames and returns the byte count. Throws ConfigurationError for
/// an empty sequence and Error when the stream fails.
std::size_t emit_telemetry(const std::vector<TelemetryFrame>& frames, std::ostream& out, TelemetryFormat format,
                           std::size_t frames_per_flush = 0);
/// File form; throws Error when the destination cannot be opened or written.
std::size_t emit_telemetry(const std::vector<TelemetryFrame>& frames, const std::string& path,
                           TelemetryFormat format, std::size_t frames_per_flush = 0);

/// One CSV record.
struct TelemetryRow {
  double t = 0.0;
  Vec3 q = Vec3::Zero();      // master task-space position
  Vec3 d = Vec3::Zero();      // slave position
  Vec3 f_est = Vec3::Zero();  // predicted interaction force
  Vec3 f_u = Vec3::Zero();    // rendered master force
  std::uint32_t flags = 0;

  bool operator==(const TelemetryRow&) const = default;
};

TelemetryRow csv_row(const TelemetryFrame& frame);

/// Throws Error on a bad header, malformed record or out-of-order timestamp.
std::vector<TelemetryRow> read_csv_telemetry(std::istream& in);
std::vector<TelemetryFrame> read_jsonl_telemetry(std::istream& in);

/// Full-frame JSON record without the trailing newline.
std::string frame_to_json(const TelemetryFrame& frame);
TelemetryFrame frame_from_json(const std::string& line);

}  // namespace microtele
