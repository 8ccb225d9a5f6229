#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "airwrite/error.hpp"

namespace airwrite {

/// One tracked fingertip sample. `stroke` starts at 1 and grows by one at
/// each pen-up boundary.
struct TrajectoryPoint {
  double p = 0.0;
  double q = 0.0;
  int stroke = 1;

  friend bool operator==(const TrajectoryPoint&, const TrajectoryPoint&) = default;
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
  std::optional<std::string> label;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Checks the stroke-identity invariant: ids start at 1 and are either
/// unchanged or incremented by exactly one between neighbours.
inline bool strokes_well_formed(const std::vector<TrajectoryPoint>& points) {
  if (points.empty()) return true;
  if (points.front().stroke != 1) return false;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const int step = points[i].stroke - points[i - 1].stroke;
    if (step != 0 && step != 1) return false;
  }
  return true;
}

/// Maps the trajectory into the unit square, preserving aspect ratio and
/// centering the shorter axis. A single-point bounding box maps to (0.5, 0.5).
inline Trajectory normalize(const Trajectory& traj) {
  if (traj.empty()) throw Error(ErrorKind::empty_input, "normalize: empty trajectory");
  double min_p = traj.points[0].p, max_p = min_p;
  double min_q = traj.points[0].q, max_q = min_q;
  for (const auto& pt : traj.points) {
    min_p = std::min(min_p, pt.p);
    max_p = std::max(max_p, pt.p);
    min_q = std::min(min_q, pt.q);
    max_q = std::max(max_q, pt.q);
  }
  const double extent = std::max(max_p - min_p, max_q - min_q);
  const double cp = 0.5 * (min_p + max_p);
  const double cq = 0.5 * (min_q + max_q);
  Trajectory out = traj;
  for (auto& pt : out.points) {
    if (extent > 0.0) {
      pt.p = (pt.p - cp) / extent + 0.5;
      pt.q = (pt.q - cq) / extent + 0.5;
    } else {
      pt.p = 0.5;
      pt.q = 0.5;
    }
  }
  return out;
}

namespace detail {

// Walks one polyline, emitting a point each time the straight-line distance
// from the last emitted point reaches `spacing`. On straight runs this is the
// arc-length subdivision; on a resampled polyline it reproduces its own
// vertices, which makes the operation idempotent.
inline void resample_stroke(const std::vector<TrajectoryPoint>& stroke, double spacing,
                            std::vector<TrajectoryPoint>& out) {
  out.push_back(stroke.front());
  if (stroke.size() == 1) return;
  double ax = stroke.front().p;
  double ay = stroke.front().q;
  std::size_t seg = 0;
  double t0 = 0.0;
  const double r2 = spacing * spacing;
  while (seg + 1 < stroke.size()) {
    const double x0 = stroke[seg].p, y0 = stroke[seg].q;
    const double dx = stroke[seg + 1].p - x0, dy = stroke[seg + 1].q - y0;
    const double a = dx * dx + dy * dy;
    if (a == 0.0) {
      ++seg;
      t0 = 0.0;
      continue;
    }
    // |P0 + t*d - anchor|^2 = spacing^2, take the far root.
    const double fx = x0 - ax, fy = y0 - ay;
    const double b = 2.0 * (fx * dx + fy * dy);
    const double c = fx * fx + fy * fy - r2;
    if (t0 == 0.0 && c >= -1e-9 * r2) {
      // The segment start sits on the circle (up to rounding) or beyond it.
      ax = x0;
      ay = y0;
      out.push_back({ax, ay, stroke.front().stroke});
      continue;
    }
    const double disc = b * b - 4.0 * a * c;
    const double t = disc >= 0.0 ? (-b + std::sqrt(disc)) / (2.0 * a) : 2.0;
    if (t >= t0 && t <= 1.0) {
      ax = x0 + t * dx;
      ay = y0 + t * dy;
      out.push_back({ax, ay, stroke.front().stroke});
      t0 = t;
    } else {
      ++seg;
      t0 = 0.0;
    }
  }
  const auto& last = stroke.back();
  const double ex = last.p - ax, ey = last.q - ay;
  if (std::sqrt(ex * ex + ey * ey) > spacing * 1e-9) {
    out.push_back(last);
  } else {
    out.back() = last;
  }
}

}  // namespace detail

/// Resamples each stroke independently to equidistant spacing, keeping both
/// endpoints of every stroke and its identity.
inline Trajectory resample(const Trajectory& traj, double spacing) {
  if (!(spacing > 0.0)) throw Error(ErrorKind::invalid_config, "resample: spacing must be positive");
  Trajectory out;
  out.label = traj.label;
  std::size_t begin = 0;
  while (begin < traj.points.size()) {
    std::size_t end = begin;
    while (end < traj.points.size() && traj.points[end].stroke == traj.points[begin].stroke) ++end;
    std::vector<TrajectoryPoint> stroke(traj.points.begin() + static_cast<std::ptrdiff_t>(begin),
                                        traj.points.begin() + static_cast<std::ptrdiff_t>(end));
    detail::resample_stroke(stroke, spacing, out.points);
    begin = end;
  }
  return out;
}

}  // namespace airwrite
