#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "airwrite/error.hpp"
#include "airwrite/trajectory/synth.hpp"
#include "airwrite/trajectory/trajectory.hpp"

namespace airwrite {

/// Parses a [[p, q, s], ...] array. Throws parse errors naming the offending
/// point; stroke ids must start at 1 and never decrease or skip
/// (non_monotone).
inline std::vector<TrajectoryPoint> points_from_json(const nlohmann::json& arr) {
  if (!arr.is_array()) throw Error(ErrorKind::parse, "points must be an array");
  std::vector<TrajectoryPoint> points;
  points.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& row = arr[i];
    if (!row.is_array() || row.size() != 3 || !row[0].is_number() || !row[1].is_number() ||
        !row[2].is_number_integer()) {
      throw Error(ErrorKind::parse, "point " + std::to_string(i) + " must be [number, number, integer]");
    }
    TrajectoryPoint pt{row[0].get<double>(), row[1].get<double>(), row[2].get<int>()};
    if (!std::isfinite(pt.p) || !std::isfinite(pt.q)) {
      throw Error(ErrorKind::parse, "point " + std::to_string(i) + " has a non-finite coordinate");
    }
    points.push_back(pt);
  }
  if (!strokes_well_formed(points)) {
    throw Error(ErrorKind::non_monotone, "stroke ids must start at 1 and increase by at most 1");
  }
  return points;
}

inline nlohmann::json points_to_json(const std::vector<TrajectoryPoint>& points) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& pt : points) arr.push_back({pt.p, pt.q, pt.stroke});
  return arr;
}

/// Accepts a corpus line ({"label", "points"}) or a bare {"points"} object.
inline Trajectory trajectory_from_json(const nlohmann::json& obj, bool require_label = false) {
  if (!obj.is_object()) throw Error(ErrorKind::parse, "sample must be a JSON object");
  if (!obj.contains("points")) throw Error(ErrorKind::parse, "missing field 'points'");
  Trajectory traj;
  traj.points = points_from_json(obj.at("points"));
  if (obj.contains("label")) {
    if (!obj.at("label").is_string()) throw Error(ErrorKind::parse, "label must be a string");
    traj.label = obj.at("label").get<std::string>();
  } else if (require_label) {
    throw Error(ErrorKind::parse, "missing field 'label'");
  }
  return traj;
}

inline nlohmann::json trajectory_to_json(const Trajectory& traj) {
  nlohmann::json obj;
  obj["label"] = traj.label.value_or("");
  obj["points"] = points_to_json(traj.points);
  return obj;
}

/// Reads a JSON Lines corpus. Blank lines are skipped; any malformed line
/// aborts with its 1-based line number.
inline std::vector<Trajectory> read_corpus(std::istream& in) {
  std::vector<Trajectory> corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      corpus.push_back(trajectory_from_json(nlohmann::json::parse(line), true));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

inline std::vector<Trajectory> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open corpus '" + path + "'");
  return read_corpus(in);
}

inline void write_corpus(std::ostream& out, const std::vector<Trajectory>& corpus) {
  for (const auto& traj : corpus) out << trajectory_to_json(traj).dump() << '\n';
}

inline void write_corpus(const std::string& path, const std::vector<Trajectory>& corpus) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write corpus '" + path + "'");
  write_corpus(out, corpus);
}

inline std::vector<GlyphTemplate> templates_from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) throw Error(ErrorKind::parse, "template file must be a JSON array");
  std::vector<GlyphTemplate> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& entry = doc[i];
    try {
      GlyphTemplate glyph;
      glyph.class_id = static_cast<int>(i);
      glyph.label = entry.at("class").get<std::string>();
      for (const auto& stroke : entry.at("strokes")) {
        std::vector<Point2> poly;
        for (const auto& pt : stroke) poly.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
        glyph.strokes.push_back(std::move(poly));
      }
      out.push_back(std::move(glyph));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::parse, "template " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<GlyphTemplate> read_templates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open templates '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, "templates '" + path + "': " + e.what());
  }
  return templates_from_json(doc);
}

}  // namespace airwrite
