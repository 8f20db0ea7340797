#ifndef RTKAR_ERROR_HPP
#define RTKAR_ERROR_HPP

#include <stdexcept>
#include <string>

namespace rtkar {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

/// Bearing requested between two coincident points.
class DegenerateBearing : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// Malformed KML, envelope or config text. `element()` names the offending
/// element or field.
class ParseError : public Error {
 public:
  ParseError(std::string element, const std::string& what)
      : Error(element + ": " + what), element_(std::move(element)) {}

  const std::string& element() const noexcept { return element_; }

 private:
  std::string element_;
};

class CalibrationRejected : public Error {
 public:
  CalibrationRejected(double distance_m, double yaw_residual_deg,
                      const std::string& what)
      : Error(what),
        distance_m_(distance_m),
        yaw_residual_deg_(yaw_residual_deg) {}

  double distance_m() const noexcept { return distance_m_; }
  double yaw_residual_deg() const noexcept { return yaw_residual_deg_; }

 private:
  double distance_m_;
  double yaw_residual_deg_;
};

/// A sample was requested while the scenario was not paused.
class SamplingStateError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class ConnectionError : public Error {
 public:
  using Error::Error;
};

}  // namespace rtkar

#endif  // RTKAR_ERROR_HPP
