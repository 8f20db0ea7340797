#ifndef RTKAR_KML_HPP
#define RTKAR_KML_HPP

// Position messages as single-Placemark KML documents.
//
//   <kml xmlns="http://www.opengis.net/kml/2.2">
//     <Placemark>
//       <name>SENSOR_ID</name>
//       <ExtendedData>
//         <Data name="sensor_id"><value>..</value></Data>
//         <Data name="kind"><value>RTK|GPS</value></Data>
//         <Data name="seq"><value>..</value></Data>
//         <Data name="timestamp_ms"><value>..</value></Data>
//         <Data name="fix_quality"><value>FIXED|FLOAT|SPP</value></Data>
//       </ExtendedData>
//       <Point><coordinates>LON,LAT,ALT</coordinates></Point>
//     </Placemark>
//   </kml>
//
// Numbers are written in shortest round-trip form, so decode(encode(m)) == m.

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "rtkar/error.hpp"
#include "rtkar/geodesy.hpp"
#include "rtkar/text.hpp"

namespace rtkar {

enum class SensorKind { RTK, GPS };
enum class FixQuality { FIXED, FLOAT, SPP };

inline std::string_view to_string(SensorKind k) {
  return k == SensorKind::RTK ? "RTK" : "GPS";
}

inline std::string_view to_string(FixQuality q) {
  switch (q) {
    case FixQuality::FIXED: return "FIXED";
    case FixQuality::FLOAT: return "FLOAT";
    case FixQuality::SPP: return "SPP";
  }
  return "SPP";
}

inline std::optional<SensorKind> parse_sensor_kind(std::string_view s) {
  if (s == "RTK") return SensorKind::RTK;
  if (s == "GPS") return SensorKind::GPS;
  return std::nullopt;
}

inline std::optional<FixQuality> parse_fix_quality(std::string_view s) {
  if (s == "FIXED") return FixQuality::FIXED;
  if (s == "FLOAT") return FixQuality::FLOAT;
  if (s == "SPP") return FixQuality::SPP;
  return std::nullopt;
}

struct SensorMessage {
  std::string sensor_id;
  SensorKind kind = SensorKind::RTK;
  std::uint64_t seq = 0;
  std::int64_t timestamp_ms = 0;
  GeoPoint position;
  FixQuality fix_quality = FixQuality::FIXED;

  friend bool operator==(const SensorMessage&, const SensorMessage&) = default;
};

inline std::string encode_kml(const SensorMessage& msg) {
  const auto data = [](std::string_view name, std::string_view value) {
    std::string s = "<Data name=\"";
    s += name;
    s += "\"><value>";
    s += text::xml_escape(value);
    s += "</value></Data>";
    return s;
  };
  std::string out;
  out.reserve(512);
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>";
  out += "<kml xmlns=\"http://www.opengis.net/kml/2.2\"><Placemark>";
  out += "<name>" + text::xml_escape(msg.sensor_id) + "</name>";
  out += "<ExtendedData>";
  out += data("sensor_id", msg.sensor_id);
  out += data("kind", to_string(msg.kind));
  out += data("seq", std::to_string(msg.seq));
  out += data("timestamp_ms", std::to_string(msg.timestamp_ms));
  out += data("fix_quality", to_string(msg.fix_quality));
  out += "</ExtendedData>";
  out += "<Point><coordinates>";
  out += text::format_double(msg.position.longitude_deg());
  out += ',';
  out += text::format_double(msg.position.latitude_deg());
  out += ',';
  out += text::format_double(msg.position.altitude_m());
  out += "</coordinates></Point></Placemark></kml>";
  return out;
}

inline SensorMessage decode_kml(std::string_view kml_text) {
  namespace pt = boost::property_tree;
  pt::ptree doc;
  try {
    std::istringstream in{std::string(kml_text)};
    pt::read_xml(in, doc, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError("kml", std::string("malformed XML: ") + e.message());
  }

  const auto kml = doc.get_child_optional("kml");
  if (!kml) throw ParseError("kml", "missing root element");
  const auto placemark = kml->get_child_optional("Placemark");
  if (!placemark) throw ParseError("Placemark", "missing element");
  const auto point = placemark->get_child_optional("Point");
  if (!point) throw ParseError("Point", "missing element");
  const auto coords = point->get_optional<std::string>("coordinates");
  if (!coords) throw ParseError("coordinates", "missing element");

  std::map<std::string, std::string> fields;
  if (const auto ext = placemark->get_child_optional("ExtendedData")) {
    for (const auto& [tag, node] : *ext) {
      if (tag != "Data") continue;
      const auto name = node.get_optional<std::string>("<xmlattr>.name");
      if (!name) throw ParseError("Data", "missing name attribute");
      fields[*name] = node.get<std::string>("value", "");
    }
  }
  const auto field = [&](const std::string& name) -> const std::string& {
    auto it = fields.find(name);
    if (it == fields.end()) throw ParseError(name, "missing ExtendedData entry");
    return it->second;
  };

  SensorMessage msg;
  msg.sensor_id = field("sensor_id");
  const auto kind = parse_sensor_kind(field("kind"));
  if (!kind) throw ParseError("kind", "unknown sensor kind '" + field("kind") + "'");
  msg.kind = *kind;
  msg.seq = text::parse_int<std::uint64_t>(field("seq"), "seq");
  msg.timestamp_ms = text::parse_int<std::int64_t>(field("timestamp_ms"), "timestamp_ms");
  const auto quality = parse_fix_quality(field("fix_quality"));
  if (!quality) {
    throw ParseError("fix_quality", "unknown fix quality '" + field("fix_quality") + "'");
  }
  msg.fix_quality = *quality;

  std::string_view c = *coords;
  double parts[3] = {0.0, 0.0, 0.0};
  int count = 0;
  while (true) {
    const auto comma = c.find(',');
    if (count == 3) throw ParseError("coordinates", "too many components");
    parts[count++] = text::parse_double(c.substr(0, comma), "coordinates");
    if (comma == std::string_view::npos) break;
    c.remove_prefix(comma + 1);
  }
  if (count < 2) throw ParseError("coordinates", "expected lon,lat[,alt]");
  const double lon = parts[0], lat = parts[1], alt = parts[2];
  if (!std::isfinite(lon) || !std::isfinite(lat) || !std::isfinite(alt) ||
      lat < -90.0 || lat > 90.0 || lon < -180.0 || lon > 180.0) {
    throw ParseError("coordinates", "out of range: '" + *coords + "'");
  }
  msg.position = GeoPoint(lat, lon, alt);
  return msg;
}

}  // namespace rtkar

#endif  // RTKAR_KML_HPP
