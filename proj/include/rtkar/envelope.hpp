#ifndef RTKAR_ENVELOPE_HPP
#define RTKAR_ENVELOPE_HPP

// Relay wire format: one JSON object per line.
//
//   type       HELLO | POSITION | COMMAND | SAMPLE_MARK | METRICS | NACK
//   role       sensor | hmd | console
//   sensor_id  string, POSITION only (empty otherwise)
//   seq        unsigned counter, strictly increasing per sender stream
//   sent_ms    sender clock, integer milliseconds
//   payload    string: KML (POSITION), command JSON (COMMAND), sample JSON
//              (SAMPLE_MARK), metrics JSON (METRICS), reason text (NACK)
//
// NACK is only ever sent by the relay.

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "rtkar/error.hpp"

namespace rtkar {

enum class MsgType { HELLO, POSITION, COMMAND, SAMPLE_MARK, METRICS, NACK };
enum class Role { sensor, hmd, console };

inline std::string_view to_string(MsgType t) {
  switch (t) {
    case MsgType::HELLO: return "HELLO";
    case MsgType::POSITION: return "POSITION";
    case MsgType::COMMAND: return "COMMAND";
    case MsgType::SAMPLE_MARK: return "SAMPLE_MARK";
    case MsgType::METRICS: return "METRICS";
    case MsgType::NACK: return "NACK";
  }
  return "NACK";
}

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::sensor: return "sensor";
    case Role::hmd: return "hmd";
    case Role::console: return "console";
  }
  return "sensor";
}

inline std::optional<MsgType> parse_msg_type(std::string_view s) {
  for (auto t : {MsgType::HELLO, MsgType::POSITION, MsgType::COMMAND,
                 MsgType::SAMPLE_MARK, MsgType::METRICS, MsgType::NACK}) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

inline std::optional<Role> parse_role(std::string_view s) {
  for (auto r : {Role::sensor, Role::hmd, Role::console}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

struct Envelope {
  MsgType msg_type = MsgType::HELLO;
  Role role = Role::sensor;
  std::string sensor_id;
  std::uint64_t seq = 0;
  std::int64_t sent_ms = 0;
  std::string payload;

  friend bool operator==(const Envelope&, const Envelope&) = default;
};

/// Serializes without the trailing newline.
inline std::string encode_envelope(const Envelope& env) {
  nlohmann::json j;
  j["type"] = to_string(env.msg_type);
  j["role"] = to_string(env.role);
  j["sensor_id"] = env.sensor_id;
  j["seq"] = env.seq;
  j["sent_ms"] = env.sent_ms;
  j["payload"] = env.payload;
  return j.dump();
}

inline Envelope decode_envelope(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) {
    line.remove_suffix(1);
  }
  const auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ParseError("envelope", "not a JSON object");
  }
  const auto str = [&](const char* key, bool required) -> std::string {
    if (!j.contains(key)) {
      if (required) throw ParseError(key, "missing field");
      return {};
    }
    if (!j[key].is_string()) throw ParseError(key, "must be a string");
    return j[key].get<std::string>();
  };
  Envelope env;
  const auto type = parse_msg_type(str("type", true));
  if (!type) throw ParseError("type", "unknown message type");
  env.msg_type = *type;
  const auto role = parse_role(str("role", true));
  if (!role) throw ParseError("role", "unknown role");
  env.role = *role;
  env.sensor_id = str("sensor_id", false);
  env.payload = str("payload", false);
  if (j.contains("seq")) {
    if (!j["seq"].is_number_unsigned()) throw ParseError("seq", "must be an unsigned integer");
    env.seq = j["seq"].get<std::uint64_t>();
  }
  if (j.contains("sent_ms")) {
    if (!j["sent_ms"].is_number_integer()) throw ParseError("sent_ms", "must be an integer");
    env.sent_ms = j["sent_ms"].get<std::int64_t>();
  }
  if (env.msg_type == MsgType::POSITION && env.sensor_id.empty()) {
    throw ParseError("sensor_id", "required for POSITION");
  }
  return env;
}

}  // namespace rtkar

#endif  // RTKAR_ENVELOPE_HPP
