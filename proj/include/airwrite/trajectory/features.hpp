#pragma once

#include <array>
#include <cmath>
#include <tuple>
#include <utility>
#include <vector>

#include "airwrite/error.hpp"
#include "airwrite/tensor/value.hpp"
#include "airwrite/trajectory/trajectory.hpp"

namespace airwrite {

/// Derivative representation of one trajectory point: position offsets,
/// writing direction, curvature and the stroke-change indicator pair.
struct FeatureVector {
  double dp = 0.0;
  double dq = 0.0;
  double sin_a = 0.0;
  double cos_a = 1.0;
  double sin_b = 0.0;
  double cos_b = 1.0;
  double same_stroke = 1.0;
  double new_stroke = 0.0;

  static constexpr std::size_t width = 8;

  std::array<double, width> as_array() const {
    return {dp, dq, sin_a, cos_a, sin_b, cos_b, same_stroke, new_stroke};
  }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

using FeatureSequence = std::vector<FeatureVector>;

namespace detail {

// (sin, cos) of the angle of (x, y); the zero vector maps to (0, 1).
inline std::pair<double, double> direction(double x, double y) {
  const double len = std::hypot(x, y);
  if (len == 0.0) return {0.0, 1.0};
  return {y / len, x / len};
}

// (sin, cos) of the signed turn from u to v; (0, 1) when either is zero.
inline std::pair<double, double> turn(double ux, double uy, double vx, double vy) {
  const double lu = std::hypot(ux, uy);
  const double lv = std::hypot(vx, vy);
  if (lu == 0.0 || lv == 0.0) return {0.0, 1.0};
  ux /= lu;
  uy /= lu;
  vx /= lv;
  vy /= lv;
  const double s = ux * vy - uy * vx;
  const double c = ux * vx + uy * vy;
  const double n = std::hypot(s, c);
  return {s / n, c / n};
}

}  // namespace detail

/// One row per interior point: row t uses v_t = x_{t+1} - x_t for the offsets
/// and direction, v_{t+1} for the curvature, and compares s_t with s_{t+1}.
inline FeatureSequence extract_features(const Trajectory& traj) {
  const auto& pts = traj.points;
  if (pts.size() < 3) {
    throw Error(ErrorKind::too_short, "need at least 3 points, got " + std::to_string(pts.size()));
  }
  FeatureSequence rows;
  rows.reserve(pts.size() - 2);
  for (std::size_t t = 0; t + 2 < pts.size(); ++t) {
    const double vx = pts[t + 1].p - pts[t].p;
    const double vy = pts[t + 1].q - pts[t].q;
    const double wx = pts[t + 2].p - pts[t + 1].p;
    const double wy = pts[t + 2].q - pts[t + 1].q;
    FeatureVector row;
    row.dp = vx;
    row.dq = vy;
    std::tie(row.sin_a, row.cos_a) = detail::direction(vx, vy);
    std::tie(row.sin_b, row.cos_b) = detail::turn(vx, vy, wx, wy);
    const bool same = pts[t].stroke == pts[t + 1].stroke;
    row.same_stroke = same ? 1.0 : 0.0;
    row.new_stroke = same ? 0.0 : 1.0;
    rows.push_back(row);
  }
  return rows;
}

inline constexpr double default_resample_spacing = 0.02;

/// normalize -> resample -> extract_features, the path every sample takes
/// into the model.
inline FeatureSequence prepare_features(const Trajectory& traj,
                                        double spacing = default_resample_spacing) {
  if (traj.empty()) throw Error(ErrorKind::empty_input, "empty trajectory");
  return extract_features(resample(normalize(traj), spacing));
}

/// Packs a feature sequence into a [rows x 8] constant, repeating the last
/// row until at least `min_rows` rows exist.
inline Value features_to_value(const FeatureSequence& seq, std::size_t min_rows = 1) {
  if (seq.empty()) throw Error(ErrorKind::empty_input, "empty feature sequence");
  const std::size_t rows = std::max(seq.size(), min_rows);
  std::vector<double> data;
  data.reserve(rows * FeatureVector::width);
  for (std::size_t t = 0; t < rows; ++t) {
    const auto arr = seq[std::min(t, seq.size() - 1)].as_array();
    data.insert(data.end(), arr.begin(), arr.end());
  }
  return Value::constant({rows, FeatureVector::width}, std::move(data));
}

}  // namespace airwrite
