#ifndef RTKAR_SCENARIO_HPP
#define RTKAR_SCENARIO_HPP

// Semi-dynamic scenario runner: survey the base station, calibrate the HMD at
// the rover, drive the script, and record one error per sensor at every
// paused waypoint.
//
// Scenario files are JSON. Every key is optional; omitted keys take the
// defaults below (the field-trial regime).
//
//   seed                      integer, default 1
//   tick_ms                   simulation step, default 100
//   trajectory.loop           bool, default false
//   trajectory.waypoints[]    {lat, lon, alt, speed_mps, pause_s}
//   sensors[]                 {id, kind: RTK|GPS, rate_hz, noise: {...}}
//     noise                   {sigma_east_m, sigma_north_m, jump_prob,
//                              jump_scale_m, bias_east_m, bias_north_m}
//   station                   {lat, lon, alt, spp_fixes, survey_count,
//                              noise: {...}, propagate_to_rtk}
//   drift                     {random_walk_sigma_m_per_sqrt_s,
//                              yaw_drift_deg_per_min}
//   calibration               {reference: surveyed|rtk_fix, yaw_deg,
//                              colocation_error_m, max_colocation_m,
//                              yaw_tolerance_deg}
//   relay                     {min_interval_ms, queue_bound}
//   sampling                  {offset_s}: delay after the rover stops
//                              before the sample is taken

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rtkar/envelope.hpp"
#include "rtkar/error.hpp"
#include "rtkar/eval.hpp"
#include "rtkar/geodesy.hpp"
#include "rtkar/hmd_tracker.hpp"
#include "rtkar/kml.hpp"
#include "rtkar/relay.hpp"
#include "rtkar/sensor_sim.hpp"
#include "rtkar/text.hpp"

namespace rtkar {

struct SensorConfig {
  std::string id;
  SensorKind kind = SensorKind::RTK;
  double rate_hz = 10.0;
  NoiseModel noise;
};

struct StationConfig {
  GeoPoint position;
  std::size_t spp_fixes = 1500;
  std::size_t survey_count = kDefaultSurveyCount;
  /// Single-point noise of the station's own receiver during survey.
  NoiseModel noise{7.453, 7.453, 0.0, 0.0, 0.0, 0.0};
  /// RTK fixes inherit the station survey error.
  bool propagate_to_rtk = true;
};

enum class CalibrationReference {
  /// World reference is a pre-surveyed marker at the rover start.
  surveyed,
  /// World reference is the first RTK fix received.
  rtk_fix,
};

struct CalibrationConfig {
  CalibrationReference reference = CalibrationReference::surveyed;
  double yaw_deg = 0.0;             ///< wearer's residual heading error
  double colocation_error_m = 0.0;  ///< wearer's offset (east) from the rover
  CalibrationPolicy policy;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  std::int64_t tick_ms = 100;
  TrajectoryScript trajectory;
  std::vector<SensorConfig> sensors;
  StationConfig station;
  DriftModel drift;
  CalibrationConfig calibration;
  relay::RelayConfig relay;
  double sample_offset_s = 1.0;

  void validate() const {
    trajectory.validate();
    if (tick_ms <= 0) throw InvalidArgument("scenario: tick_ms must be > 0");
    if (sensors.empty()) throw InvalidArgument("scenario: no sensors");
    std::map<std::string, int> ids;
    for (const auto& s : sensors) {
      if (s.id.empty()) throw InvalidArgument("scenario: sensor id must be non-empty");
      if (++ids[s.id] > 1) throw InvalidArgument("scenario: duplicate sensor id " + s.id);
      if (!(s.rate_hz > 0.0)) throw InvalidArgument("scenario: rate_hz must be > 0");
      s.noise.validate();
    }
    station.noise.validate();
    if (station.survey_count == 0 || station.spp_fixes < station.survey_count) {
      throw InvalidArgument("scenario: station.spp_fixes must be >= survey_count >= 1");
    }
    drift.validate();
    if (!(sample_offset_s >= 0.0)) throw InvalidArgument("scenario: sampling.offset_s must be >= 0");
  }
};

/// Urban test loop: start point plus seven stop locations, 5 s dwell each.
inline TrajectoryScript default_trajectory() {
  const GeoPoint start(49.50410, 5.94850);
  // (bearing, leg length) from the previous waypoint.
  const double legs[][2] = {{40, 35},  {95, 28},  {150, 42}, {200, 30},
                            {255, 38}, {310, 26}, {15, 33}};
  TrajectoryScript script;
  script.waypoints.push_back({start, 1.0, 0.0});
  GeoPoint p = start;
  for (const auto& leg : legs) {
    p = destination(p, leg[0], leg[1]);
    script.waypoints.push_back({p, 1.0, 5.0});
  }
  return script;
}

inline ScenarioConfig default_scenario() {
  ScenarioConfig c;
  c.trajectory = default_trajectory();
  c.sensors = {{"rtk-rover", SensorKind::RTK, 10.0, NoiseModel::rtk_default()},
               {"phone-gps", SensorKind::GPS, 10.0, NoiseModel::gps_default()}};
  c.station.position = destination(c.trajectory.waypoints.front().position, 180.0, 20.0);
  return c;
}

/// Zero noise, zero drift, exact calibration.
inline ScenarioConfig ideal_scenario() {
  ScenarioConfig c = default_scenario();
  for (auto& s : c.sensors) s.noise = NoiseModel::zero();
  c.station.noise = NoiseModel::zero();
  c.drift = {};
  c.calibration = {};
  return c;
}

// ---------------------------------------------------------------------------
// JSON config

namespace detail {

inline nlohmann::json noise_to_json(const NoiseModel& m) {
  return {{"sigma_east_m", m.sigma_east_m}, {"sigma_north_m", m.sigma_north_m},
          {"jump_prob", m.jump_prob},       {"jump_scale_m", m.jump_scale_m},
          {"bias_east_m", m.bias_east_m},   {"bias_north_m", m.bias_north_m}};
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where + "." + key, e.what());
  }
}

inline NoiseModel noise_from_json(const nlohmann::json& j, NoiseModel d, const std::string& where) {
  if (!j.is_object()) throw ParseError(where, "must be an object");
  d.sigma_east_m = get_or(j, "sigma_east_m", d.sigma_east_m, where);
  d.sigma_north_m = get_or(j, "sigma_north_m", d.sigma_north_m, where);
  d.jump_prob = get_or(j, "jump_prob", d.jump_prob, where);
  d.jump_scale_m = get_or(j, "jump_scale_m", d.jump_scale_m, where);
  d.bias_east_m = get_or(j, "bias_east_m", d.bias_east_m, where);
  d.bias_north_m = get_or(j, "bias_north_m", d.bias_north_m, where);
  return d;
}

inline GeoPoint geo_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.contains("lat") || !j.contains("lon")) throw ParseError(where, "lat and lon required");
  try {
    return GeoPoint(get_or(j, "lat", 0.0, where), get_or(j, "lon", 0.0, where),
                    get_or(j, "alt", 0.0, where));
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(where, e.what());
  }
}

}  // namespace detail

inline nlohmann::json scenario_to_json(const ScenarioConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["tick_ms"] = c.tick_ms;
  j["trajectory"]["loop"] = c.trajectory.loop;
  j["trajectory"]["waypoints"] = nlohmann::json::array();
  for (const auto& w : c.trajectory.waypoints) {
    j["trajectory"]["waypoints"].push_back({{"lat", w.position.latitude_deg()},
                                            {"lon", w.position.longitude_deg()},
                                            {"alt", w.position.altitude_m()},
                                            {"speed_mps", w.speed_mps},
                                            {"pause_s", w.pause_s}});
  }
  j["sensors"] = nlohmann::json::array();
  for (const auto& s : c.sensors) {
    j["sensors"].push_back({{"id", s.id},
                            {"kind", std::string(to_string(s.kind))},
                            {"rate_hz", s.rate_hz},
                            {"noise", detail::noise_to_json(s.noise)}});
  }
  j["station"] = {{"lat", c.station.position.latitude_deg()},
                  {"lon", c.station.position.longitude_deg()},
                  {"alt", c.station.position.altitude_m()},
                  {"spp_fixes", c.station.spp_fixes},
                  {"survey_count", c.station.survey_count},
                  {"noise", detail::noise_to_json(c.station.noise)},
                  {"propagate_to_rtk", c.station.propagate_to_rtk}};
  j["drift"] = {{"random_walk_sigma_m_per_sqrt_s", c.drift.random_walk_sigma_m_per_sqrt_s},
                {"yaw_drift_deg_per_min", c.drift.yaw_drift_deg_per_min}};
  j["calibration"] = {
      {"reference", c.calibration.reference == CalibrationReference::surveyed ? "surveyed" : "rtk_fix"},
      {"yaw_deg", c.calibration.yaw_deg},
      {"colocation_error_m", c.calibration.colocation_error_m},
      {"max_colocation_m", c.calibration.policy.max_colocation_m},
      {"yaw_tolerance_deg", c.calibration.policy.yaw_tolerance_deg}};
  j["relay"] = {{"min_interval_ms", c.relay.throttle.min_interval_ms},
                {"queue_bound", c.relay.queue_bound}};
  j["sampling"] = {{"offset_s", c.sample_offset_s}};
  return j;
}

inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("config", "top level must be an object");
  ScenarioConfig c = default_scenario();
  c.seed = detail::get_or<std::uint64_t>(j, "seed", c.seed, "config");
  c.tick_ms = detail::get_or<std::int64_t>(j, "tick_ms", c.tick_ms, "config");

  if (j.contains("trajectory")) {
    const auto& t = j["trajectory"];
    c.trajectory.loop = detail::get_or(t, "loop", c.trajectory.loop, "trajectory");
    if (t.contains("waypoints")) {
      if (!t["waypoints"].is_array()) throw ParseError("trajectory.waypoints", "must be an array");
      c.trajectory.waypoints.clear();
      std::size_t i = 0;
      for (const auto& w : t["waypoints"]) {
        const std::string where = "trajectory.waypoints[" + std::to_string(i++) + "]";
        c.trajectory.waypoints.push_back({detail::geo_from_json(w, where),
                                          detail::get_or(w, "speed_mps", 1.0, where),
                                          detail::get_or(w, "pause_s", 0.0, where)});
      }
    }
  }
  if (j.contains("sensors")) {
    if (!j["sensors"].is_array()) throw ParseError("sensors", "must be an array");
    c.sensors.clear();
    std::size_t i = 0;
    for (const auto& s : j["sensors"]) {
      const std::string where = "sensors[" + std::to_string(i++) + "]";
      SensorConfig sc;
      sc.id = detail::get_or<std::string>(s, "id", "", where);
      const auto kind = parse_sensor_kind(detail::get_or<std::string>(s, "kind", "RTK", where));
      if (!kind) throw ParseError(where + ".kind", "must be RTK or GPS");
      sc.kind = *kind;
      sc.rate_hz = detail::get_or(s, "rate_hz", 10.0, where);
      const NoiseModel base = sc.kind == SensorKind::RTK ? NoiseModel::rtk_default()
                                                         : NoiseModel::gps_default();
      sc.noise = s.contains("noise") ? detail::noise_from_json(s["noise"], base, where + ".noise")
                                     : base;
      c.sensors.push_back(sc);
    }
  }
  if (j.contains("station")) {
    const auto& s = j["station"];
    if (s.contains("lat") || s.contains("lon")) {
      c.station.position = detail::geo_from_json(s, "station");
    }
    c.station.spp_fixes = detail::get_or(s, "spp_fixes", c.station.spp_fixes, "station");
    c.station.survey_count = detail::get_or(s, "survey_count", c.station.survey_count, "station");
    if (s.contains("noise")) {
      c.station.noise = detail::noise_from_json(s["noise"], c.station.noise, "station.noise");
    }
    c.station.propagate_to_rtk =
        detail::get_or(s, "propagate_to_rtk", c.station.propagate_to_rtk, "station");
  }
  if (j.contains("drift")) {
    const auto& d = j["drift"];
    c.drift.random_walk_sigma_m_per_sqrt_s = detail::get_or(
        d, "random_walk_sigma_m_per_sqrt_s", c.drift.random_walk_sigma_m_per_sqrt_s, "drift");
    c.drift.yaw_drift_deg_per_min =
        detail::get_or(d, "yaw_drift_deg_per_min", c.drift.yaw_drift_deg_per_min, "drift");
  }
  if (j.contains("calibration")) {
    const auto& k = j["calibration"];
    const auto ref = detail::get_or<std::string>(k, "reference", "surveyed", "calibration");
    if (ref == "surveyed") {
      c.calibration.reference = CalibrationReference::surveyed;
    } else if (ref == "rtk_fix") {
      c.calibration.reference = CalibrationReference::rtk_fix;
    } else {
      throw ParseError("calibration.reference", "must be surveyed or rtk_fix");
    }
    c.calibration.yaw_deg = detail::get_or(k, "yaw_deg", c.calibration.yaw_deg, "calibration");
    c.calibration.colocation_error_m =
        detail::get_or(k, "colocation_error_m", c.calibration.colocation_error_m, "calibration");
    c.calibration.policy.max_colocation_m = detail::get_or(
        k, "max_colocation_m", c.calibration.policy.max_colocation_m, "calibration");
    c.calibration.policy.yaw_tolerance_deg = detail::get_or(
        k, "yaw_tolerance_deg", c.calibration.policy.yaw_tolerance_deg, "calibration");
  }
  if (j.contains("relay")) {
    const auto& r = j["relay"];
    c.relay.throttle.min_interval_ms =
        detail::get_or(r, "min_interval_ms", c.relay.throttle.min_interval_ms, "relay");
    c.relay.queue_bound = detail::get_or(r, "queue_bound", c.relay.queue_bound, "relay");
  }
  if (j.contains("sampling")) {
    c.sample_offset_s = detail::get_or(j["sampling"], "offset_s", c.sample_offset_s, "sampling");
  }
  c.validate();
  return c;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config " + path);
  const auto j = nlohmann::json::parse(in, nullptr, false, true);
  if (j.is_discarded()) throw ParseError(path, "invalid JSON");
  return scenario_from_json(j);
}

/// Stable digest of the configuration: FNV-1a over the canonical JSON form,
/// excluding the seed.
inline std::string config_digest(const ScenarioConfig& c) {
  nlohmann::json j = scenario_to_json(c);
  j.erase("seed");
  return text::hex64(text::fnv1a64(j.dump()));
}

// ---------------------------------------------------------------------------
// Transport between the simulated sensors and the simulated HMD.

class ScenarioLink {
 public:
  virtual ~ScenarioLink() = default;
  /// Sends one sensor envelope line at simulation time `t_ms`.
  virtual void send_sensor(const std::string& line, std::int64_t t_ms) = 0;
  /// Lines delivered to the HMD since the last call. With `settle`, waits
  /// until in-flight traffic has arrived.
  virtual std::vector<std::string> receive_hmd(bool settle) = 0;
  /// Real-time pacing hook, called once per tick.
  virtual void end_tick(std::int64_t /*tick_ms*/) {}
};

/// Sensors and HMD attached to an in-memory relay driven by the simulation
/// clock. Fully deterministic.
class InProcessLink final : public ScenarioLink {
 public:
  explicit InProcessLink(const relay::RelayConfig& config)
      : core_(config, clock_.as_clock()) {
    sensor_ = core_.open_session();
    hmd_ = core_.open_session();
    core_.handle_line(sensor_, encode_envelope({MsgType::HELLO, Role::sensor, "", 0, 0, ""}));
    core_.handle_line(hmd_, encode_envelope({MsgType::HELLO, Role::hmd, "", 0, 0, ""}));
    core_.drain(sensor_);
    core_.drain(hmd_);
  }

  void send_sensor(const std::string& line, std::int64_t t_ms) override {
    clock_.set(t_ms);
    core_.handle_line(sensor_, line);
  }

  std::vector<std::string> receive_hmd(bool) override { return core_.drain(hmd_); }

  relay::RelayCore& core() { return core_; }

 private:
  relay::ManualClock clock_;
  relay::RelayCore core_;
  relay::SessionId sensor_ = 0;
  relay::SessionId hmd_ = 0;
};

struct ScenarioResult {
  EvalReport report;
  std::vector<ErrorSample> samples;
  std::string overlay_log;  ///< CSV with kOverlayLogHeader
  GeoPoint surveyed_station;
  LocalPoint survey_error;  ///< surveyed minus true station, ENU
  CalibrationRecord calibration{GeoPoint{}, LocalPoint{}, 0.0};
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for one named component of a scenario.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view component) {
  return splitmix64(seed ^ text::fnv1a64(component));
}

inline std::int64_t script_duration_ms(const TrajectoryScript& script) {
  double total = 0.0;
  const auto& w = script.waypoints;
  const std::size_t legs = script.loop ? w.size() : w.size() - 1;
  for (std::size_t i = 0; i < w.size(); ++i) {
    total += w[i].pause_s;
    if (i < legs && w.size() > 1) {
      total += haversine_distance(w[i].position, w[(i + 1) % w.size()].position).meters() /
               w[i].speed_mps;
    }
  }
  return static_cast<std::int64_t>(std::ceil(total * 1000.0));
}

struct StationSurvey {
  GeoPoint surveyed;
  LocalPoint error;  ///< surveyed minus true position, ENU
};

/// Base-station survey: average of the last survey_count single-point fixes.
inline StationSurvey survey_base_station(const ScenarioConfig& config) {
  Rng rng(derive_seed(config.seed, "station"));
  std::vector<GeoPoint> spp;
  spp.reserve(config.station.spp_fixes);
  for (std::size_t i = 0; i < config.station.spp_fixes; ++i) {
    spp.push_back(sample_fix(config.station.position, config.station.noise, rng));
  }
  const GeoPoint surveyed = survey_station(spp, config.station.survey_count);
  return {surveyed, geo_to_local(config.station.position, surveyed)};
}

struct SensorEmitter {
  SensorSimulator sim;
  std::int64_t period_ms;
};

/// One simulator per configured sensor. RTK sensors inherit the station
/// survey error when the config says so.
inline std::vector<SensorEmitter> make_emitters(const ScenarioConfig& config,
                                                const LocalPoint& survey_error) {
  std::vector<SensorEmitter> emitters;
  for (const auto& s : config.sensors) {
    NoiseModel m = s.noise;
    if (s.kind == SensorKind::RTK && config.station.propagate_to_rtk) {
      m.bias_east_m += survey_error.east_m;
      m.bias_north_m += survey_error.north_m;
    }
    const auto period = std::max<std::int64_t>(1, std::llround(1000.0 / s.rate_hz));
    emitters.push_back(
        {SensorSimulator(s.id, s.kind, m, derive_seed(config.seed, "sensor/" + s.id)), period});
  }
  return emitters;
}

/// Runs one scenario over `link`. Deterministic for the in-process link.
inline ScenarioResult run_scenario(const ScenarioConfig& config, ScenarioLink& link) {
  config.validate();
  ScenarioResult result;

  const StationSurvey survey = survey_base_station(config);
  result.surveyed_station = survey.surveyed;
  result.survey_error = survey.error;
  std::vector<SensorEmitter> emitters = make_emitters(config, survey.error);

  const TrajectoryScript& script = config.trajectory;
  const GeoPoint start = script.waypoints.front().position;
  const double yaw_true = normalize_deg_360(config.calibration.yaw_deg);

  Rng vslam_rng(derive_seed(config.seed, "vslam"));
  // The HMD frame origin is where the wearer stands at calibration,
  // colocation_error_m east of the rover. Afterwards the wearer walks with
  // the rover; the pose tracks that motion through vslam_step.
  HmdPose pose{{0.0, 0.0, 0.0}, yaw_true};
  LocalPoint last_true_enu{config.calibration.colocation_error_m, 0.0, 0.0};
  HmdTracker tracker(config.calibration.policy);
  std::optional<SensorMessage> first_rtk;

  std::ostringstream overlay_log;
  overlay_log << kOverlayLogHeader << '\n';

  std::map<std::size_t, std::int64_t> pause_started_ms;
  std::map<std::size_t, bool> sampled;
  std::size_t next_location = 1;

  const std::int64_t end_ms = script_duration_ms(script) + config.tick_ms;
  const double dt_s = static_cast<double>(config.tick_ms) / 1000.0;

  const auto consume = [&](const std::vector<std::string>& lines, std::int64_t t_ms) {
    for (const auto& line : lines) {
      const Envelope env = decode_envelope(line);
      if (env.msg_type != MsgType::POSITION) continue;
      const SensorMessage msg = decode_kml(env.payload);
      if (!tracker.calibrated() && msg.kind == SensorKind::RTK && !first_rtk) first_rtk = msg;
      if (!tracker.calibrated()) continue;
      if (auto est = tracker.on_message(msg, t_ms)) {
        write_overlay_log_row(overlay_log, *est, pose.position);
      }
    }
  };

  for (std::int64_t t_ms = 0; t_ms <= end_ms; t_ms += config.tick_ms) {
    const TrajectorySample truth = step_trajectory(script, static_cast<double>(t_ms) / 1000.0);

    if (t_ms > 0) {
      const LocalPoint true_enu = geo_to_local(start, truth.position);
      const LocalPoint increment = true_enu - last_true_enu;
      last_true_enu = true_enu;
      pose = vslam_step(pose, enu_to_frame(increment, pose.yaw_deg), 0.0, config.drift, dt_s,
                        vslam_rng);
    }

    for (auto& e : emitters) {
      if (t_ms % e.period_ms != 0) continue;
      const SensorMessage msg = e.sim.emit(truth.position, t_ms);
      const Envelope env{MsgType::POSITION, Role::sensor, msg.sensor_id, msg.seq, t_ms,
                         encode_kml(msg)};
      link.send_sensor(encode_envelope(env), t_ms);
    }

    const bool pending_sample = truth.paused && truth.waypoint && *truth.waypoint > 0 &&
                                !sampled[*truth.waypoint];
    std::vector<std::string> lines = link.receive_hmd(pending_sample || !tracker.calibrated());

    if (!tracker.calibrated()) {
      consume(lines, t_ms);  // only notes the first RTK fix
      std::optional<GeoPoint> world_ref;
      if (config.calibration.reference == CalibrationReference::surveyed) {
        world_ref = start;
      } else if (first_rtk) {
        world_ref = first_rtk->position;
      }
      if (world_ref) {
        tracker.calibrate_now(*world_ref, pose, config.calibration.colocation_error_m);
        result.calibration = *tracker.calibration();
      }
    }
    consume(lines, t_ms);

    if (pending_sample) {
      const std::size_t wp = *truth.waypoint;
      auto [it, fresh] = pause_started_ms.try_emplace(wp, t_ms);
      const double pause_s = script.waypoints[wp].pause_s;
      const double wait_s = std::min(config.sample_offset_s, pause_s / 2.0);
      if (static_cast<double>(t_ms - it->second) >= wait_s * 1000.0 - 1e-9) {
        const std::string location = "L" + std::to_string(next_location++);
        for (const auto& s : config.sensors) {
          const auto est = tracker.latest(s.id);
          if (!est) continue;
          result.samples.push_back(record_sample(pose.position, *est, location, s.kind,
                                                 truth.paused, t_ms));
        }
        sampled[wp] = true;
      }
    }
    link.end_tick(config.tick_ms);
  }

  result.overlay_log = overlay_log.str();
  result.report = summarize(result.samples);
  result.report.seed = config.seed;
  result.report.config_digest = config_digest(config);
  return result;
}

inline ScenarioResult run_scenario(const ScenarioConfig& config) {
  InProcessLink link(config.relay);
  return run_scenario(config, link);
}

struct EnsembleResult {
  std::size_t runs = 0;
  double gps_mean_m = 0.0;  ///< mean of the per-run GPS means
  double rtk_mean_m = 0.0;
  std::vector<double> gps_run_means;
  std::vector<double> rtk_run_means;
};

/// Runs `config` for seeds first_seed .. first_seed + runs - 1.
inline EnsembleResult run_ensemble(ScenarioConfig config, std::size_t runs,
                                   std::uint64_t first_seed = 1) {
  if (runs == 0) throw InvalidArgument("run_ensemble: runs must be >= 1");
  EnsembleResult out;
  out.runs = runs;
  for (std::size_t i = 0; i < runs; ++i) {
    config.seed = first_seed + i;
    const EvalReport r = run_scenario(config).report;
    out.gps_run_means.push_back(r.at(SensorKind::GPS).mean_m);
    out.rtk_run_means.push_back(r.at(SensorKind::RTK).mean_m);
  }
  const auto mean = [](const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
  };
  out.gps_mean_m = mean(out.gps_run_means);
  out.rtk_mean_m = mean(out.rtk_run_means);
  return out;
}

}  // namespace rtkar

#endif  // RTKAR_SCENARIO_HPP
