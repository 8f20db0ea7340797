#ifndef RTKAR_LIVE_HPP
#define RTKAR_LIVE_HPP

// Interactive simulation behind the operator console. The harness joins a
// relay twice: as a sensor (simulated receivers, rover commands) and as an
// hmd (overlay tracking, calibration, sample marks). State is published to
// consoles as METRICS envelopes from the hmd connection:
//
//   {"kind":"state", "t_ms", "paused", "calibrated", "heading_deg", "speed_mps",
//    "truth":{east,north}, "fixes":{id:{kind,east,north}},
//    "overlay":{id:{kind,east,north}}, "hmd":{east,north}}
//   {"kind":"calibration", "ok", ...}
//
// Positions are ENU metres relative to the calibration reference (the
// rover's start before calibration). A mark is answered with a SAMPLE_MARK
// whose payload carries the recorded rows, or the reason it was refused.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rtkar/relay_net.hpp"
#include "rtkar/scenario.hpp"

namespace rtkar {

struct LiveOptions {
  std::int64_t telemetry_interval_ms = 100;
  /// Follow the scripted trajectory until the first drive command; otherwise
  /// the rover waits at the script's first waypoint.
  bool follow_script = false;
  /// Sensor sampled on a mark; empty samples every sensor.
  std::string sample_sensor;
  /// Samples CSV rewritten after every accepted mark; empty disables.
  std::string samples_path;
};

class LiveHarness {
 public:
  LiveHarness(ScenarioConfig config, const std::string& host, std::uint16_t port,
              LiveOptions options = {})
      : config_(std::move(config)),
        options_(std::move(options)),
        rover_((config_.validate(), config_.trajectory)),
        start_(config_.trajectory.waypoints.front().position),
        vslam_rng_(derive_seed(config_.seed, "vslam")),
        pose_{{0.0, 0.0, 0.0}, normalize_deg_360(config_.calibration.yaw_deg)},
        last_true_enu_{config_.calibration.colocation_error_m, 0.0, 0.0},
        tracker_(config_.calibration.policy) {
    if (options_.telemetry_interval_ms <= 0) {
      throw InvalidArgument("LiveHarness: telemetry_interval_ms must be > 0");
    }
    if (!options_.sample_sensor.empty() && !find_sensor(options_.sample_sensor)) {
      throw InvalidArgument("LiveHarness: unknown sample sensor " + options_.sample_sensor);
    }
    emitters_ = make_emitters(config_, survey_base_station(config_).error);
    if (!options_.follow_script) rover_.apply(DriveCommand{0.0, 0.0});
    sensor_.connect(host, port);
    sensor_.hello(Role::sensor);
    hmd_.connect(host, port);
    hmd_.hello(Role::hmd);
  }

  /// Advances the simulation by one tick.
  void tick() {
    for (const auto& line : sensor_.drain()) on_sensor_line(line);

    t_ms_ += config_.tick_ms;
    const double dt_s = static_cast<double>(config_.tick_ms) / 1000.0;
    const TrajectorySample& truth = rover_.step(dt_s);
    const LocalPoint true_enu = geo_to_local(start_, truth.position);
    pose_ = vslam_step(pose_, enu_to_frame(true_enu - last_true_enu_, pose_.yaw_deg), 0.0,
                       config_.drift, dt_s, vslam_rng_);
    last_true_enu_ = true_enu;

    for (auto& e : emitters_) {
      if (t_ms_ % e.period_ms != 0) continue;
      const SensorMessage msg = e.sim.emit(truth.position, t_ms_);
      sensor_.send(encode_envelope(
          {MsgType::POSITION, Role::sensor, msg.sensor_id, msg.seq, t_ms_, encode_kml(msg)}));
    }

    for (const auto& line : hmd_.drain()) on_hmd_line(line);

    if (t_ms_ % options_.telemetry_interval_ms == 0) publish(state_json());
    if (sensor_.closed_by_peer() || hmd_.closed_by_peer()) {
      throw ConnectionError("relay closed the connection");
    }
  }

  /// Ticks against the wall clock until `stop` is set. `time_scale` is wall
  /// seconds per simulated second.
  void run(const std::atomic<bool>& stop, double time_scale = 1.0) {
    auto next = std::chrono::steady_clock::now();
    while (!stop.load()) {
      tick();
      next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double, std::milli>(static_cast<double>(config_.tick_ms) *
                                                    time_scale));
      std::this_thread::sleep_until(next);
    }
  }

  std::int64_t now_ms() const { return t_ms_; }
  const TrajectorySample& truth() const { return rover_.current(); }
  const HmdPose& pose() const { return pose_; }
  const HmdTracker& tracker() const { return tracker_; }
  const std::vector<ErrorSample>& samples() const { return samples_; }

  /// Current state as published to consoles.
  nlohmann::json state_json() const {
    const TrajectorySample& truth = rover_.current();
    const GeoPoint ref = tracker_.calibrated() ? tracker_.calibration()->p_ref_world() : start_;
    const auto xy = [](const LocalPoint& p) {
      return nlohmann::json{{"east", p.east_m}, {"north", p.north_m}};
    };
    nlohmann::json j{{"kind", "state"},
                     {"t_ms", t_ms_},
                     {"paused", truth.paused},
                     {"calibrated", tracker_.calibrated()},
                     {"heading_deg", rover_.heading_deg()},
                     {"speed_mps", rover_.speed_mps()},
                     {"truth", xy(geo_to_local(ref, truth.position))},
                     {"fixes", nlohmann::json::object()},
                     {"overlay", nlohmann::json::object()}};
    for (const auto& [id, msg] : latest_fix_) {
      auto p = xy(geo_to_local(ref, msg.position));
      p["kind"] = to_string(msg.kind);
      j["fixes"][id] = p;
    }
    if (const auto& calib = tracker_.calibration()) {
      const auto to_world = [&](const LocalPoint& in_frame) {
        return frame_to_enu(in_frame - calib->p_ref_hmd(), calib->yaw_at_calibration_deg());
      };
      for (const auto& s : config_.sensors) {
        if (const auto est = tracker_.latest(s.id)) {
          auto p = xy(to_world(est->target_hmd));
          p["kind"] = to_string(est->sensor_kind);
          j["overlay"][s.id] = p;
        }
      }
      j["hmd"] = xy(to_world(pose_.position));
    }
    return j;
  }

 private:
  const SensorConfig* find_sensor(const std::string& id) const {
    for (const auto& s : config_.sensors) {
      if (s.id == id) return &s;
    }
    return nullptr;
  }

  void on_sensor_line(const std::string& line) {
    const Envelope env = decode_envelope(line);
    if (env.msg_type == MsgType::NACK) throw ProtocolError("relay rejected sensor data: " + env.payload);
    if (env.msg_type != MsgType::COMMAND) return;
    rover_.apply(decode_command(env.payload));
  }

  void on_hmd_line(const std::string& line) {
    const Envelope env = decode_envelope(line);
    switch (env.msg_type) {
      case MsgType::POSITION: {
        const SensorMessage msg = decode_kml(env.payload);
        latest_fix_.insert_or_assign(msg.sensor_id, msg);
        tracker_.on_message(msg, t_ms_);
        break;
      }
      case MsgType::COMMAND:
        if (std::holds_alternative<CalibrateCommand>(decode_command(env.payload))) calibrate();
        break;
      case MsgType::SAMPLE_MARK: {
        const auto j = nlohmann::json::parse(env.payload, nullptr, false);
        std::string label;
        if (j.is_object() && j.contains("label") && j["label"].is_string()) {
          label = j["label"].get<std::string>();
        }
        mark(label);
        break;
      }
      default:
        break;
    }
  }

  // The wearer stands at the rover. A surveyed reference means the rover is
  // on a known marker, so its true position is the world reference.
  void calibrate() {
    std::optional<GeoPoint> world_ref;
    if (config_.calibration.reference == CalibrationReference::surveyed) {
      world_ref = rover_.current().position;
    } else {
      for (const auto& [id, msg] : latest_fix_) {
        if (msg.kind == SensorKind::RTK) world_ref = msg.position;
      }
    }
    if (!world_ref) {
      publish({{"kind", "calibration"}, {"ok", false}, {"reason", "no RTK fix received yet"}});
      return;
    }
    try {
      const CalibrationRecord& c =
          tracker_.calibrate_now(*world_ref, pose_, config_.calibration.colocation_error_m);
      publish({{"kind", "calibration"},
               {"ok", true},
               {"t_ms", t_ms_},
               {"lat", c.p_ref_world().latitude_deg()},
               {"lon", c.p_ref_world().longitude_deg()},
               {"yaw_deg", c.yaw_at_calibration_deg()}});
    } catch (const CalibrationRejected& e) {
      publish({{"kind", "calibration"},
               {"ok", false},
               {"reason", e.what()},
               {"distance_m", e.distance_m()},
               {"yaw_residual_deg", e.yaw_residual_deg()}});
    }
  }

  void mark(std::string label) {
    if (label.empty()) label = "L" + std::to_string(++unlabeled_marks_);
    nlohmann::json reply{{"label", label}};
    const TrajectorySample& truth = rover_.current();
    if (!tracker_.calibrated()) {
      reply["rejected"] = "not calibrated";
    } else if (!truth.paused) {
      reply["rejected"] = "rover is not paused";
    } else {
      reply["samples"] = nlohmann::json::array();
      for (const auto& s : config_.sensors) {
        if (!options_.sample_sensor.empty() && s.id != options_.sample_sensor) continue;
        const auto est = tracker_.latest(s.id);
        if (!est) continue;
        const ErrorSample sample = record_sample(pose_.position, *est, label, s.kind, true, t_ms_);
        samples_.push_back(sample);
        std::ostringstream row;
        write_samples_csv(row, {sample});
        std::string text = row.str();
        text = text.substr(kSamplesCsvHeader.size() + 1);
        if (!text.empty() && text.back() == '\n') text.pop_back();
        reply["samples"].push_back({{"location_id", sample.location_id},
                                    {"sensor_kind", to_string(sample.sensor_kind)},
                                    {"error_m", sample.error_m},
                                    {"timestamp_ms", sample.timestamp_ms},
                                    {"csv_row", text}});
      }
      if (reply["samples"].empty()) reply["rejected"] = "no overlay estimate yet";
      save_samples();
    }
    hmd_.send(encode_envelope(
        {MsgType::SAMPLE_MARK, Role::hmd, "", ++hmd_seq_, t_ms_, reply.dump()}));
  }

  void save_samples() const {
    if (options_.samples_path.empty()) return;
    std::ofstream out(options_.samples_path, std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write " + options_.samples_path);
    write_samples_csv(out, samples_);
  }

  void publish(const nlohmann::json& payload) {
    hmd_.send(encode_envelope({MsgType::METRICS, Role::hmd, "", ++hmd_seq_, t_ms_, payload.dump()}));
  }

  ScenarioConfig config_;
  LiveOptions options_;
  RoverSimulator rover_;
  GeoPoint start_;
  std::vector<SensorEmitter> emitters_;
  Rng vslam_rng_;
  HmdPose pose_;
  LocalPoint last_true_enu_;
  HmdTracker tracker_;
  std::map<std::string, SensorMessage> latest_fix_;
  std::vector<ErrorSample> samples_;
  relay::RelayClient sensor_;
  relay::RelayClient hmd_;
  std::int64_t t_ms_ = 0;
  std::uint64_t hmd_seq_ = 0;
  std::uint64_t unlabeled_marks_ = 0;
};

}  // namespace rtkar

#endif  // RTKAR_LIVE_HPP
