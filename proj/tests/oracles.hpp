#ifndef RTKAR_TESTS_ORACLES_HPP
#define RTKAR_TESTS_ORACLES_HPP

// Test-only reference computations, kept independent of the library's
// trigonometric formulas.

#include <array>
#include <cmath>
#include <numbers>

namespace oracle {

inline constexpr double kRadius = 6371000.0;
inline constexpr double kPi = std::numbers::pi;

struct LatLon {
  double lat_deg;
  double lon_deg;
};

using Vec3 = std::array<double, 3>;

inline Vec3 unit_vector(LatLon p) {
  const double phi = p.lat_deg * kPi / 180.0;
  const double lam = p.lon_deg * kPi / 180.0;
  return {std::cos(phi) * std::cos(lam), std::cos(phi) * std::sin(lam), std::sin(phi)};
}

/// Forward geodesic by rotating the position vector within the plane spanned
/// by it and the initial direction of travel (local north/east basis).
inline LatLon forward(LatLon start, double bearing_deg, double distance_m) {
  const double phi = start.lat_deg * kPi / 180.0;
  const double lam = start.lon_deg * kPi / 180.0;
  const double theta = bearing_deg * kPi / 180.0;
  const Vec3 p = unit_vector(start);
  const Vec3 north = {-std::sin(phi) * std::cos(lam), -std::sin(phi) * std::sin(lam), std::cos(phi)};
  const Vec3 east = {-std::sin(lam), std::cos(lam), 0.0};
  const double a = distance_m / kRadius;
  Vec3 q{};
  for (int i = 0; i < 3; ++i) {
    const double dir = std::cos(theta) * north[i] + std::sin(theta) * east[i];
    q[i] = std::cos(a) * p[i] + std::sin(a) * dir;
  }
  return {std::atan2(q[2], std::hypot(q[0], q[1])) * 180.0 / kPi,
          std::atan2(q[1], q[0]) * 180.0 / kPi};
}

/// Great-circle distance from the angle between unit vectors (atan2 form).
inline double chord_distance(LatLon a, LatLon b) {
  const Vec3 u = unit_vector(a);
  const Vec3 v = unit_vector(b);
  const Vec3 c = {u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
  const double cross = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
  const double dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
  return kRadius * std::atan2(cross, dot);
}

/// Sample mean and n-1 standard deviation, naive accumulation.
struct Moments {
  double mean;
  double std;
};

template <typename Range>
Moments moments(const Range& values) {
  double n = 0.0, sum = 0.0;
  for (double v : values) {
    sum += v;
    n += 1.0;
  }
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace oracle

#endif  // RTKAR_TESTS_ORACLES_HPP
