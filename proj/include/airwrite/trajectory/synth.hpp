#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "airwrite/trajectory/features.hpp"
#include "airwrite/trajectory/trajectory.hpp"

namespace airwrite {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// A class prototype: one or more polylines of control points in the unit
/// square (y grows downward, as on a writing surface).
struct GlyphTemplate {
  int class_id = 0;
  std::string label;
  std::vector<std::vector<Point2>> strokes;
};

struct SynthOptions {
  double noise = 0.02;           // sigma of the control-point jitter
  double max_rotation_deg = 10.0;
  double max_scale = 0.10;       // relative
  double spacing = default_resample_spacing;
};

/// Template as a trajectory (stroke ids 1..n), without any distortion.
inline Trajectory template_trajectory(const GlyphTemplate& glyph) {
  Trajectory traj;
  traj.label = glyph.label;
  int stroke = 1;
  for (const auto& poly : glyph.strokes) {
    for (const auto& pt : poly) traj.points.push_back({pt.x, pt.y, stroke});
    ++stroke;
  }
  return traj;
}

/// Draws `per_class` distorted copies of every template: Gaussian jitter of
/// the control points, a random rotation and scale about the glyph center,
/// then resampling and normalization. Output is class-major and fully
/// determined by `seed`.
inline std::vector<Trajectory> synth_generate(const std::vector<GlyphTemplate>& templates,
                                              int per_class, std::uint64_t seed,
                                              const SynthOptions& options = {}) {
  if (per_class < 1) throw Error(ErrorKind::invalid_config, "per_class must be at least 1");
  for (const auto& glyph : templates) {
    if (glyph.strokes.empty()) {
      throw Error(ErrorKind::invalid_config, "template '" + glyph.label + "' has no strokes");
    }
    for (const auto& s : glyph.strokes) {
      if (s.size() < 2) {
        throw Error(ErrorKind::invalid_config,
                    "template '" + glyph.label + "' has a stroke with fewer than 2 points");
      }
    }
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double max_rot = options.max_rotation_deg * std::numbers::pi / 180.0;

  std::vector<Trajectory> out;
  out.reserve(templates.size() * static_cast<std::size_t>(per_class));
  for (const auto& glyph : templates) {
    for (int i = 0; i < per_class; ++i) {
      const double angle = max_rot * unit(rng);
      const double k = 1.0 + options.max_scale * unit(rng);
      const double ca = std::cos(angle), sa = std::sin(angle);
      Trajectory traj;
      traj.label = glyph.label;
      int stroke = 1;
      for (const auto& poly : glyph.strokes) {
        for (const auto& pt : poly) {
          const double x = pt.x + options.noise * jitter(rng) - 0.5;
          const double y = pt.y + options.noise * jitter(rng) - 0.5;
          traj.points.push_back({0.5 + k * (ca * x - sa * y), 0.5 + k * (sa * x + ca * y), stroke});
        }
        ++stroke;
      }
      out.push_back(normalize(resample(traj, options.spacing)));
    }
  }
  return out;
}

}  // namespace airwrite
