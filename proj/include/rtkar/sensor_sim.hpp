#ifndef RTKAR_SENSOR_SIM_HPP
#define RTKAR_SENSOR_SIM_HPP

// Seedable simulators for the UGV trajectory, the RTK rover, the phone GPS
// and the base-station survey.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rtkar/command.hpp"
#include "rtkar/error.hpp"
#include "rtkar/geodesy.hpp"
#include "rtkar/kml.hpp"

namespace rtkar {

/// Deterministic random source. One instance per simulator; never shared.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// ---------------------------------------------------------------------------
// Trajectory

struct Waypoint {
  GeoPoint position;
  double speed_mps = 1.0;  ///< speed on the leg leaving this waypoint
  double pause_s = 0.0;    ///< dwell on arrival, before leaving
};

struct TrajectoryScript {
  std::vector<Waypoint> waypoints;
  bool loop = false;

  void validate() const {
    if (waypoints.empty()) throw InvalidArgument("TrajectoryScript: no waypoints");
    for (const auto& w : waypoints) {
      if (!(w.speed_mps > 0.0) || !std::isfinite(w.speed_mps)) {
        throw InvalidArgument("TrajectoryScript: speeds must be > 0");
      }
      if (!(w.pause_s >= 0.0) || !std::isfinite(w.pause_s)) {
        throw InvalidArgument("TrajectoryScript: pauses must be >= 0");
      }
    }
  }
};

struct TrajectorySample {
  GeoPoint position;
  bool paused = false;
  /// Waypoint the rover is dwelling at, if paused at one.
  std::optional<std::size_t> waypoint;
};

/// Position along `script` at time `t_s`. Legs follow great circles at
/// constant speed; inside a waypoint's pause window the rover sits exactly on
/// the waypoint. Past the end the rover stays on the last waypoint unless the
/// script loops.
inline TrajectorySample step_trajectory(const TrajectoryScript& script, double t_s) {
  script.validate();
  if (!(t_s >= 0.0)) throw InvalidArgument("step_trajectory: t must be >= 0");
  const auto& wps = script.waypoints;
  const std::size_t n = wps.size();
  if (n == 1) return {wps[0].position, true, 0};

  const std::size_t legs = script.loop ? n : n - 1;
  if (script.loop) {
    double cycle = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cycle += wps[i].pause_s +
               haversine_distance(wps[i].position, wps[(i + 1) % n].position).meters() /
                   wps[i].speed_mps;
    }
    if (cycle > 0.0) t_s = std::fmod(t_s, cycle);
  }

  double t = t_s;
  for (std::size_t i = 0; i < legs; ++i) {
    const Waypoint& from = wps[i];
    const Waypoint& to = wps[(i + 1) % n];
    if (t < from.pause_s) return {from.position, true, i};
    t -= from.pause_s;
    const double dist = haversine_distance(from.position, to.position).meters();
    const double leg_time = dist / from.speed_mps;
    if (t < leg_time) {
      const double bearing = initial_bearing(from.position, to.position).degrees();
      return {destination(from.position, bearing, from.speed_mps * t), false,
              std::nullopt};
    }
    t -= leg_time;
  }
  const std::size_t last = script.loop ? 0 : n - 1;
  return {wps[last].position, true, last};
}

// ---------------------------------------------------------------------------
// Sensor noise

struct NoiseModel {
  double sigma_east_m = 0.0;
  double sigma_north_m = 0.0;
  double jump_prob = 0.0;     ///< per-sample probability of a multipath jump
  double jump_scale_m = 0.0;  ///< jump magnitude drawn uniformly in [0, scale]
  double bias_east_m = 0.0;
  double bias_north_m = 0.0;

  friend bool operator==(const NoiseModel&, const NoiseModel&) = default;

  void validate() const {
    const auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
    if (!finite_nonneg(sigma_east_m) || !finite_nonneg(sigma_north_m)) {
      throw InvalidArgument("NoiseModel: sigmas must be >= 0");
    }
    if (!(jump_prob >= 0.0 && jump_prob <= 1.0)) {
      throw InvalidArgument("NoiseModel: jump_prob must be in [0, 1]");
    }
    if (!finite_nonneg(jump_scale_m)) {
      throw InvalidArgument("NoiseModel: jump_scale_m must be >= 0");
    }
    if (!std::isfinite(bias_east_m) || !std::isfinite(bias_north_m)) {
      throw InvalidArgument("NoiseModel: bias must be finite");
    }
  }

  NoiseModel scaled(double k) const {
    NoiseModel m = *this;
    m.sigma_east_m *= k;
    m.sigma_north_m *= k;
    return m;
  }

  static NoiseModel zero() { return {}; }
  /// Phone-grade GPS in an urban canyon.
  static NoiseModel gps_default() { return {7.453, 7.453, 0.05, 15.0, 0.0, 0.0}; }
  /// RTK fixed solution with a near-constant offset.
  static NoiseModel rtk_default() { return {0.126, 0.126, 0.0, 0.0, 0.7, 0.0}; }
};

/// Horizontal ENU displacement for one fix. Always consumes the same random
/// draws regardless of the model, so two models sharing a seed see the same
/// underlying noise and jump events.
inline LocalPoint sample_displacement(const NoiseModel& model, Rng& rng) {
  const double z_east = rng.normal();
  const double z_north = rng.normal();
  const double u_jump = rng.uniform();
  const double u_mag = rng.uniform();
  const double u_dir = rng.uniform();
  LocalPoint d{model.bias_east_m + model.sigma_east_m * z_east,
               model.bias_north_m + model.sigma_north_m * z_north, 0.0};
  if (u_jump < model.jump_prob) {
    const double mag = u_mag * model.jump_scale_m;
    const double dir = 2.0 * std::numbers::pi * u_dir;
    d.east_m += mag * std::sin(dir);
    d.north_m += mag * std::cos(dir);
  }
  return d;
}

/// Noisy fix around `true_pos`. An all-zero model returns `true_pos` exactly.
inline GeoPoint sample_fix(const GeoPoint& true_pos, const NoiseModel& model, Rng& rng) {
  return local_to_geo(true_pos, sample_displacement(model, rng));
}

inline constexpr std::size_t kDefaultSurveyCount = 1000;

/// Base-station surveyed position: mean of the last `n` single-point fixes.
inline GeoPoint survey_station(std::span<const GeoPoint> fixes,
                               std::size_t n = kDefaultSurveyCount) {
  if (n == 0) throw InvalidArgument("survey_station: n must be >= 1");
  if (fixes.size() < n) {
    throw InsufficientData("survey_station: " + std::to_string(fixes.size()) +
                           " fixes, need " + std::to_string(n));
  }
  return mean_position(fixes.subspan(fixes.size() - n));
}

/// One simulated receiver: noise model, own RNG and sequence counter.
class SensorSimulator {
 public:
  SensorSimulator(std::string sensor_id, SensorKind kind, NoiseModel model,
                  std::uint64_t seed)
      : sensor_id_(std::move(sensor_id)), kind_(kind), model_(model), rng_(seed) {
    model_.validate();
  }

  /// Fix for the current truth, stamped with the next sequence number.
  SensorMessage emit(const GeoPoint& truth, std::int64_t timestamp_ms) {
    SensorMessage m;
    m.sensor_id = sensor_id_;
    m.kind = kind_;
    m.seq = ++seq_;
    m.timestamp_ms = timestamp_ms;
    m.position = sample_fix(truth, model_, rng_);
    m.fix_quality = kind_ == SensorKind::RTK ? FixQuality::FIXED : FixQuality::SPP;
    return m;
  }

  const std::string& sensor_id() const { return sensor_id_; }
  SensorKind kind() const { return kind_; }
  const NoiseModel& model() const { return model_; }

 private:
  std::string sensor_id_;
  SensorKind kind_;
  NoiseModel model_;
  Rng rng_;
  std::uint64_t seq_ = 0;
};

/// Rover driven either by a script or live by operator commands. A drive
/// command switches to manual mode for the rest of the run.
class RoverSimulator {
 public:
  explicit RoverSimulator(TrajectoryScript script) : script_(std::move(script)) {
    script_.validate();
    sample_ = step_trajectory(script_, 0.0);
    manual_position_ = sample_.position;
  }

  void apply(const Command& cmd) {
    std::visit(
        [this](const auto& c) {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, DriveCommand>) {
            manual_ = true;
            commanded_pause_ = false;
            heading_deg_ = c.heading_deg;
            speed_mps_ = c.speed_mps;
            manual_position_ = sample_.position;
          } else if constexpr (std::is_same_v<T, PauseCommand>) {
            commanded_pause_ = true;
          } else if constexpr (std::is_same_v<T, ResumeCommand>) {
            commanded_pause_ = false;
          }
        },
        cmd);
  }

  /// Advances the simulation clock by `dt_s`.
  const TrajectorySample& step(double dt_s) {
    if (!(dt_s >= 0.0)) throw InvalidArgument("RoverSimulator::step: dt must be >= 0");
    if (commanded_pause_) {
      sample_.paused = true;
      return sample_;
    }
    if (manual_) {
      if (speed_mps_ > 0.0 && dt_s > 0.0) {
        manual_position_ = destination(manual_position_, heading_deg_, speed_mps_ * dt_s);
      }
      sample_ = {manual_position_, speed_mps_ == 0.0, std::nullopt};
      return sample_;
    }
    script_time_s_ += dt_s;
    sample_ = step_trajectory(script_, script_time_s_);
    return sample_;
  }

  const TrajectorySample& current() const { return sample_; }
  bool manual() const { return manual_; }
  double heading_deg() const { return heading_deg_; }
  double speed_mps() const { return speed_mps_; }

 private:
  TrajectoryScript script_;
  TrajectorySample sample_;
  double script_time_s_ = 0.0;
  bool manual_ = false;
  bool commanded_pause_ = false;
  double heading_deg_ = 0.0;
  double speed_mps_ = 0.0;
  GeoPoint manual_position_;
};

}  // namespace rtkar

#endif  // RTKAR_SENSOR_SIM_HPP
