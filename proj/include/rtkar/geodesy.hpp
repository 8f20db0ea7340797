#ifndef RTKAR_GEODESY_HPP
#define RTKAR_GEODESY_HPP

// Spherical-earth geodesy used to anchor the HMD frame to world fixes.
//
// All planar quantities are East-North-Up (ENU) in meters. Bearings are
// degrees clockwise from true north. The earth is a sphere of radius
// kEarthRadiusM; every baseline handled by the tracker is well under 1 km,
// where the spherical error is far below RTK noise.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>

#include "rtkar/error.hpp"

namespace rtkar {

inline constexpr double kEarthRadiusM = 6371000.0;
/// Largest offset geo_to_local accepts; the planar approximation is not
/// used beyond it.
inline constexpr double kMaxLocalOffsetM = 50000.0;

inline constexpr double deg_to_rad(double deg) {
  return deg * std::numbers::pi / 180.0;
}
inline constexpr double rad_to_deg(double rad) {
  return rad * 180.0 / std::numbers::pi;
}

/// Wraps an angle into [0, 360).
inline double normalize_deg_360(double deg) {
  if (deg >= 0.0 && deg < 360.0) return deg;
  double r = std::fmod(deg, 360.0);
  if (r < 0.0) r += 360.0;
  if (r >= 360.0) r = 0.0;
  return r;
}

/// Wraps an angle into [-180, 180). Values already in range are returned
/// bit-for-bit.
inline double normalize_deg_180(double deg) {
  if (deg >= -180.0 && deg < 180.0) return deg;
  return normalize_deg_360(deg + 180.0) - 180.0;
}

/// WGS84 geodetic position. Construction validates latitude and normalizes
/// longitude into [-180, 180).
class GeoPoint {
 public:
  GeoPoint() = default;
  GeoPoint(double latitude_deg, double longitude_deg, double altitude_m = 0.0)
      : latitude_deg_(latitude_deg),
        longitude_deg_(longitude_deg),
        altitude_m_(altitude_m) {
    if (!std::isfinite(latitude_deg) || !std::isfinite(longitude_deg) ||
        !std::isfinite(altitude_m)) {
      throw InvalidArgument("GeoPoint: non-finite component");
    }
    if (latitude_deg < -90.0 || latitude_deg > 90.0) {
      throw OutOfRange("GeoPoint: latitude " + std::to_string(latitude_deg) +
                       " outside [-90, 90]");
    }
    longitude_deg_ = normalize_deg_180(longitude_deg);
  }

  double latitude_deg() const noexcept { return latitude_deg_; }
  double longitude_deg() const noexcept { return longitude_deg_; }
  double altitude_m() const noexcept { return altitude_m_; }

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;

 private:
  double latitude_deg_ = 0.0;
  double longitude_deg_ = 0.0;
  double altitude_m_ = 0.0;
};

/// Position in a local metric frame (ENU tangent plane or HMD frame).
struct LocalPoint {
  double east_m = 0.0;
  double north_m = 0.0;
  double up_m = 0.0;

  friend bool operator==(const LocalPoint&, const LocalPoint&) = default;

  friend LocalPoint operator+(const LocalPoint& a, const LocalPoint& b) {
    return {a.east_m + b.east_m, a.north_m + b.north_m, a.up_m + b.up_m};
  }
  friend LocalPoint operator-(const LocalPoint& a, const LocalPoint& b) {
    return {a.east_m - b.east_m, a.north_m - b.north_m, a.up_m - b.up_m};
  }
  friend LocalPoint operator*(double s, const LocalPoint& a) {
    return {s * a.east_m, s * a.north_m, s * a.up_m};
  }

  bool finite() const {
    return std::isfinite(east_m) && std::isfinite(north_m) &&
           std::isfinite(up_m);
  }
  double horizontal_norm() const { return std::hypot(east_m, north_m); }
};

/// Degrees clockwise from true north, always in [0, 360).
class BearingAngle {
 public:
  BearingAngle() = default;
  explicit BearingAngle(double deg) : deg_(normalize_deg_360(deg)) {
    if (!std::isfinite(deg)) throw InvalidArgument("BearingAngle: non-finite");
  }
  double degrees() const noexcept { return deg_; }
  double radians() const noexcept { return deg_to_rad(deg_); }

 private:
  double deg_ = 0.0;
};

/// Non-negative finite distance in meters.
class DistanceMeters {
 public:
  DistanceMeters() = default;
  explicit DistanceMeters(double m) : m_(m) {
    if (!std::isfinite(m) || m < 0.0) {
      throw InvalidArgument("DistanceMeters: must be finite and >= 0");
    }
  }
  double meters() const noexcept { return m_; }

 private:
  double m_ = 0.0;
};

/// Great-circle distance on the mean-radius sphere.
inline DistanceMeters haversine_distance(const GeoPoint& a, const GeoPoint& b) {
  const double phi1 = deg_to_rad(a.latitude_deg());
  const double phi2 = deg_to_rad(b.latitude_deg());
  const double dphi = phi2 - phi1;
  const double dlambda = deg_to_rad(b.longitude_deg() - a.longitude_deg());
  const double s_phi = std::sin(dphi / 2.0);
  const double s_lambda = std::sin(dlambda / 2.0);
  // Symmetric in (a, b): the squares and the cosine product commute.
  double h = s_phi * s_phi + std::cos(phi1) * std::cos(phi2) * s_lambda * s_lambda;
  h = std::clamp(h, 0.0, 1.0);
  return DistanceMeters(2.0 * kEarthRadiusM * std::asin(std::sqrt(h)));
}

inline bool coincident(const GeoPoint& a, const GeoPoint& b) {
  return std::abs(a.latitude_deg() - b.latitude_deg()) <= 1e-12 &&
         std::abs(a.longitude_deg() - b.longitude_deg()) <= 1e-12;
}

/// Forward azimuth at `from` towards `to`. Throws DegenerateBearing for
/// coincident points.
inline BearingAngle initial_bearing(const GeoPoint& from, const GeoPoint& to) {
  if (coincident(from, to)) {
    throw DegenerateBearing("initial_bearing: coincident points");
  }
  const double phi1 = deg_to_rad(from.latitude_deg());
  const double phi2 = deg_to_rad(to.latitude_deg());
  const double dlambda = deg_to_rad(to.longitude_deg() - from.longitude_deg());
  const double y = std::sin(dlambda) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) -
                   std::sin(phi1) * std::cos(phi2) * std::cos(dlambda);
  return BearingAngle(rad_to_deg(std::atan2(y, x)));
}

/// Planar ENU offset of `target` from `reference`:
/// (d * sin(bearing), d * cos(bearing), 0).
inline LocalPoint geo_to_local(const GeoPoint& reference, const GeoPoint& target) {
  if (coincident(reference, target)) return {};
  const double d = haversine_distance(reference, target).meters();
  if (d > kMaxLocalOffsetM) {
    throw OutOfRange("geo_to_local: offset " + std::to_string(d) +
                     " m exceeds " + std::to_string(kMaxLocalOffsetM) + " m");
  }
  if (d == 0.0) return {};
  const double beta = initial_bearing(reference, target).radians();
  return {d * std::sin(beta), d * std::cos(beta), 0.0};
}

/// Overlay position in the HMD frame: reference plus offset.
inline LocalPoint overlay_position(const LocalPoint& p_ref_local,
                                   const LocalPoint& delta) {
  return p_ref_local + delta;
}

/// Point reached by travelling `distance_m` from `start` along the great
/// circle with initial bearing `bearing_deg`. Altitude is carried over.
inline GeoPoint destination(const GeoPoint& start, double bearing_deg,
                            double distance_m) {
  if (distance_m == 0.0) return start;
  const double phi1 = deg_to_rad(start.latitude_deg());
  const double lambda1 = deg_to_rad(start.longitude_deg());
  const double theta = deg_to_rad(bearing_deg);
  const double ang = distance_m / kEarthRadiusM;
  const double sin_phi2 = std::clamp(
      std::sin(phi1) * std::cos(ang) +
          std::cos(phi1) * std::sin(ang) * std::cos(theta),
      -1.0, 1.0);
  const double phi2 = std::asin(sin_phi2);
  const double lambda2 =
      lambda1 + std::atan2(std::sin(theta) * std::sin(ang) * std::cos(phi1),
                           std::cos(ang) - std::sin(phi1) * sin_phi2);
  return GeoPoint(rad_to_deg(phi2), normalize_deg_180(rad_to_deg(lambda2)),
                  start.altitude_m());
}

/// Inverse of geo_to_local: applies a horizontal ENU displacement. A zero
/// displacement returns `reference` exactly.
inline GeoPoint local_to_geo(const GeoPoint& reference, const LocalPoint& offset) {
  if (offset.east_m == 0.0 && offset.north_m == 0.0) return reference;
  return destination(reference,
                     rad_to_deg(std::atan2(offset.east_m, offset.north_m)),
                     std::hypot(offset.east_m, offset.north_m));
}

/// Expresses an ENU vector in a frame whose north axis points at compass
/// heading `yaw_deg`. With yaw 0 the vector is returned unchanged.
inline LocalPoint enu_to_frame(const LocalPoint& v, double yaw_deg) {
  if (yaw_deg == 0.0) return v;
  const double c = std::cos(deg_to_rad(yaw_deg));
  const double s = std::sin(deg_to_rad(yaw_deg));
  return {v.east_m * c - v.north_m * s, v.east_m * s + v.north_m * c, v.up_m};
}

/// Inverse of enu_to_frame.
inline LocalPoint frame_to_enu(const LocalPoint& v, double yaw_deg) {
  if (yaw_deg == 0.0) return v;
  const double c = std::cos(deg_to_rad(yaw_deg));
  const double s = std::sin(deg_to_rad(yaw_deg));
  return {v.east_m * c + v.north_m * s, -v.east_m * s + v.north_m * c, v.up_m};
}

/// Componentwise mean of co-located fixes. Longitudes are unwrapped around
/// the first fix, so a survey straddling the antimeridian still averages.
inline GeoPoint mean_position(std::span<const GeoPoint> fixes) {
  if (fixes.empty()) throw InvalidArgument("mean_position: empty input");
  const double lon0 = fixes.front().longitude_deg();
  double lat_sum = 0.0, dlon_sum = 0.0, alt_sum = 0.0;
  double dlon_min = 0.0, dlon_max = 0.0;
  for (const GeoPoint& p : fixes) {
    const double dlon = normalize_deg_180(p.longitude_deg() - lon0);
    dlon_min = std::min(dlon_min, dlon);
    dlon_max = std::max(dlon_max, dlon);
    lat_sum += p.latitude_deg();
    dlon_sum += dlon;
    alt_sum += p.altitude_m();
  }
  if (dlon_max - dlon_min > 1.0) {
    throw OutOfRange("mean_position: longitude span " +
                     std::to_string(dlon_max - dlon_min) + " deg exceeds 1 deg");
  }
  const double n = static_cast<double>(fixes.size());
  return GeoPoint(lat_sum / n, normalize_deg_180(lon0 + dlon_sum / n),
                  alt_sum / n);
}

}  // namespace rtkar

#endif  // RTKAR_GEODESY_HPP
