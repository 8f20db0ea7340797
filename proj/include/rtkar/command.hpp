#ifndef RTKAR_COMMAND_HPP
#define RTKAR_COMMAND_HPP

// Operator commands carried in COMMAND envelopes. Wire form is a JSON object
// with a "cmd" discriminator:
//   {"cmd":"drive","heading_deg":90,"speed_mps":1.0}
//   {"cmd":"pause"} {"cmd":"resume"} {"cmd":"calibrate"}
//   {"cmd":"mark_sample","label":"L3"}

#include <json.hpp>

#include <cmath>
#include <string>
#include <string_view>
#include <variant>

#include "rtkar/error.hpp"

namespace rtkar {

struct DriveCommand {
  double heading_deg = 0.0;
  double speed_mps = 0.0;
  friend bool operator==(const DriveCommand&, const DriveCommand&) = default;
};
struct PauseCommand {
  friend bool operator==(const PauseCommand&, const PauseCommand&) = default;
};
struct ResumeCommand {
  friend bool operator==(const ResumeCommand&, const ResumeCommand&) = default;
};
struct CalibrateCommand {
  friend bool operator==(const CalibrateCommand&, const CalibrateCommand&) = default;
};
struct MarkSampleCommand {
  std::string label;
  friend bool operator==(const MarkSampleCommand&, const MarkSampleCommand&) = default;
};

using Command = std::variant<DriveCommand, PauseCommand, ResumeCommand,
                             CalibrateCommand, MarkSampleCommand>;

inline std::string encode_command(const Command& cmd) {
  nlohmann::json j;
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, DriveCommand>) {
          j = {{"cmd", "drive"}, {"heading_deg", c.heading_deg}, {"speed_mps", c.speed_mps}};
        } else if constexpr (std::is_same_v<T, PauseCommand>) {
          j = {{"cmd", "pause"}};
        } else if constexpr (std::is_same_v<T, ResumeCommand>) {
          j = {{"cmd", "resume"}};
        } else if constexpr (std::is_same_v<T, CalibrateCommand>) {
          j = {{"cmd", "calibrate"}};
        } else {
          j = {{"cmd", "mark_sample"}, {"label", c.label}};
        }
      },
      cmd);
  return j.dump();
}

/// Throws ParseError naming the offending field for unknown or malformed
/// commands.
inline Command decode_command(std::string_view payload) {
  const auto j = nlohmann::json::parse(payload, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ParseError("payload", "command is not a JSON object");
  }
  if (!j.contains("cmd") || !j["cmd"].is_string()) {
    throw ParseError("cmd", "missing command name");
  }
  const auto name = j["cmd"].get<std::string>();
  const auto number = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number()) {
      throw ParseError(key, "missing numeric field for " + name);
    }
    const double v = j[key].get<double>();
    if (!std::isfinite(v)) throw ParseError(key, "non-finite");
    return v;
  };
  if (name == "drive") {
    DriveCommand d{number("heading_deg"), number("speed_mps")};
    if (d.speed_mps < 0.0) throw ParseError("speed_mps", "negative speed");
    return d;
  }
  if (name == "pause") return PauseCommand{};
  if (name == "resume") return ResumeCommand{};
  if (name == "calibrate") return CalibrateCommand{};
  if (name == "mark_sample") {
    if (!j.contains("label") || !j["label"].is_string()) {
      throw ParseError("label", "mark_sample requires a label");
    }
    return MarkSampleCommand{j["label"].get<std::string>()};
  }
  throw ParseError("cmd", "unknown command '" + name + "'");
}

}  // namespace rtkar

#endif  // RTKAR_COMMAND_HPP
