#ifndef RTKAR_HMD_TRACKER_HPP
#define RTKAR_HMD_TRACKER_HPP

// Simulated optical see-through HMD: a drifting local pose tracker, the
// two-step calibration (stand at the rover, face north) and the per-message
// overlay update.

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>

#include "rtkar/error.hpp"
#include "rtkar/geodesy.hpp"
#include "rtkar/kml.hpp"
#include "rtkar/sensor_sim.hpp"
#include "rtkar/text.hpp"

namespace rtkar {

/// Tracker pose in the HMD's own frame. `yaw_deg` is the compass heading of
/// the frame's north axis.
struct HmdPose {
  LocalPoint position;
  double yaw_deg = 0.0;
};

struct CalibrationPolicy {
  double max_colocation_m = 0.05;
  double yaw_tolerance_deg = 0.5;
};

/// Paired reference position in both frames plus the residual yaw measured
/// when the wearer faced north. Immutable.
class CalibrationRecord {
 public:
  CalibrationRecord(GeoPoint p_ref_world, LocalPoint p_ref_hmd,
                    double yaw_at_calibration_deg)
      : p_ref_world_(p_ref_world),
        p_ref_hmd_(p_ref_hmd),
        yaw_deg_(normalize_deg_360(yaw_at_calibration_deg)) {
    if (!p_ref_hmd.finite() || !std::isfinite(yaw_at_calibration_deg)) {
      throw InvalidArgument("CalibrationRecord: non-finite component");
    }
  }

  const GeoPoint& p_ref_world() const { return p_ref_world_; }
  const LocalPoint& p_ref_hmd() const { return p_ref_hmd_; }
  double yaw_at_calibration_deg() const { return yaw_deg_; }

 private:
  GeoPoint p_ref_world_;
  LocalPoint p_ref_hmd_;
  double yaw_deg_;
};

/// Captures the calibration reference. `colocation_m` is the measured
/// distance between HMD and rover.
inline CalibrationRecord calibrate(const GeoPoint& rtk_fix, const HmdPose& pose,
                                   double colocation_m = 0.0,
                                   const CalibrationPolicy& policy = {}) {
  const double yaw_residual = normalize_deg_180(pose.yaw_deg);
  if (!(colocation_m <= policy.max_colocation_m)) {
    throw CalibrationRejected(colocation_m, yaw_residual,
                              "calibration rejected: HMD is " +
                                  std::to_string(colocation_m) + " m from rover (max " +
                                  std::to_string(policy.max_colocation_m) + ")");
  }
  if (!(std::abs(yaw_residual) <= policy.yaw_tolerance_deg)) {
    throw CalibrationRejected(colocation_m, yaw_residual,
                              "calibration rejected: yaw residual " +
                                  std::to_string(yaw_residual) + " deg exceeds " +
                                  std::to_string(policy.yaw_tolerance_deg));
  }
  return CalibrationRecord(rtk_fix, pose.position, pose.yaw_deg);
}

struct OverlayEstimate {
  LocalPoint target_hmd;
  std::uint64_t source_seq = 0;
  std::int64_t computed_ms = 0;
  SensorKind sensor_kind = SensorKind::RTK;

  friend bool operator==(const OverlayEstimate&, const OverlayEstimate&) = default;
};

/// Where a world fix appears in the HMD frame: the calibration reference plus
/// the bearing/distance offset, rotated by the residual calibration yaw.
inline OverlayEstimate update_overlay(const CalibrationRecord& calib,
                                      const GeoPoint& ugv_fix,
                                      std::uint64_t source_seq = 0,
                                      std::int64_t computed_ms = 0,
                                      SensorKind kind = SensorKind::RTK) {
  const LocalPoint offset = geo_to_local(calib.p_ref_world(), ugv_fix);
  const LocalPoint in_frame = enu_to_frame(offset, calib.yaw_at_calibration_deg());
  return {overlay_position(calib.p_ref_hmd(), {in_frame.east_m, in_frame.north_m, 0.0}),
          source_seq, computed_ms, kind};
}

struct DriftModel {
  double random_walk_sigma_m_per_sqrt_s = 0.0;
  double yaw_drift_deg_per_min = 0.0;

  void validate() const {
    if (!(random_walk_sigma_m_per_sqrt_s >= 0.0) || !(yaw_drift_deg_per_min >= 0.0)) {
      throw InvalidArgument("DriftModel: parameters must be >= 0");
    }
  }
};

/// Advances the tracker pose by the commanded motion (HMD frame) plus a
/// horizontal random walk scaled by sqrt(dt) and linear yaw drift.
inline HmdPose vslam_step(const HmdPose& pose, const LocalPoint& commanded_motion,
                          double yaw_delta_deg, const DriftModel& drift, double dt_s,
                          Rng& rng) {
  if (!(dt_s > 0.0)) throw InvalidArgument("vslam_step: dt must be > 0");
  const double z_east = rng.normal();
  const double z_north = rng.normal();
  const double walk = drift.random_walk_sigma_m_per_sqrt_s * std::sqrt(dt_s);
  HmdPose next;
  next.position = pose.position + commanded_motion +
                  LocalPoint{walk * z_east, walk * z_north, 0.0};
  next.yaw_deg = normalize_deg_360(pose.yaw_deg + yaw_delta_deg +
                                   drift.yaw_drift_deg_per_min * dt_s / 60.0);
  return next;
}

/// Constant-velocity prediction from the two most recent estimates.
inline LocalPoint predictive_extrapolate(std::span<const OverlayEstimate> history,
                                         double horizon_ms) {
  if (history.size() < 2) {
    throw InsufficientData("predictive_extrapolate: need at least 2 estimates");
  }
  if (!(horizon_ms >= 0.0)) {
    throw InvalidArgument("predictive_extrapolate: horizon must be >= 0");
  }
  const OverlayEstimate& prev = history[history.size() - 2];
  const OverlayEstimate& last = history.back();
  const double dt = static_cast<double>(last.computed_ms - prev.computed_ms);
  if (horizon_ms == 0.0 || dt <= 0.0) return last.target_hmd;
  const LocalPoint velocity = (1.0 / dt) * (last.target_hmd - prev.target_hmd);
  return last.target_hmd + horizon_ms * velocity;
}

inline constexpr std::string_view kOverlayLogHeader =
    "timestamp_ms,source_seq,sensor_kind,target_east,target_north,hmd_east,hmd_north";

inline void write_overlay_log_row(std::ostream& out, const OverlayEstimate& est,
                                  const LocalPoint& hmd_position) {
  out << est.computed_ms << ',' << est.source_seq << ',' << to_string(est.sensor_kind)
      << ',' << text::format_double(est.target_hmd.east_m) << ','
      << text::format_double(est.target_hmd.north_m) << ','
      << text::format_double(hmd_position.east_m) << ','
      << text::format_double(hmd_position.north_m) << '\n';
}

/// Tracker client state: current calibration and a short overlay history per
/// sensor. Driven by a single ingest loop.
class HmdTracker {
 public:
  explicit HmdTracker(CalibrationPolicy policy = {}, std::size_t history = 8)
      : policy_(policy), history_limit_(history < 2 ? 2 : history) {}

  const CalibrationRecord& calibrate_now(const GeoPoint& rtk_fix, const HmdPose& pose,
                                         double colocation_m = 0.0) {
    calibration_.emplace(rtkar::calibrate(rtk_fix, pose, colocation_m, policy_));
    histories_.clear();
    return *calibration_;
  }

  /// Sets the calibration directly, bypassing the tolerance checks.
  void set_calibration(const CalibrationRecord& record) {
    calibration_.emplace(record);
    histories_.clear();
  }

  bool calibrated() const { return calibration_.has_value(); }
  const std::optional<CalibrationRecord>& calibration() const { return calibration_; }

  /// Returns nullopt until calibrated.
  std::optional<OverlayEstimate> on_message(const SensorMessage& msg, std::int64_t now_ms) {
    if (!calibration_) return std::nullopt;
    OverlayEstimate est = update_overlay(*calibration_, msg.position, msg.seq, now_ms, msg.kind);
    auto& h = histories_[msg.sensor_id];
    h.push_back(est);
    while (h.size() > history_limit_) h.pop_front();
    return est;
  }

  std::optional<OverlayEstimate> latest(const std::string& sensor_id) const {
    auto it = histories_.find(sensor_id);
    if (it == histories_.end() || it->second.empty()) return std::nullopt;
    return it->second.back();
  }

  LocalPoint predict(const std::string& sensor_id, double horizon_ms) const {
    auto it = histories_.find(sensor_id);
    if (it == histories_.end()) {
      throw InsufficientData("predict: no history for " + sensor_id);
    }
    const std::vector<OverlayEstimate> h(it->second.begin(), it->second.end());
    return predictive_extrapolate(h, horizon_ms);
  }

 private:
  CalibrationPolicy policy_;
  std::size_t history_limit_;
  std::optional<CalibrationRecord> calibration_;
  std::map<std::string, std::deque<OverlayEstimate>> histories_;
};

}  // namespace rtkar

#endif  // RTKAR_HMD_TRACKER_HPP
