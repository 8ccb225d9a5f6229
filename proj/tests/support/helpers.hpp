#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "airwrite/airwrite.hpp"

namespace airwrite::testing {

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline Value random_parameter(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  auto data = random_vector(shape_size(shape), rng, lo, hi);
  return Value::parameter(std::move(shape), std::move(data));
}

inline Value random_constant(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  auto data = random_vector(shape_size(shape), rng, lo, hi);
  return Value::constant(std::move(shape), std::move(data));
}

inline ParameterSet make_params(std::vector<std::pair<std::string, Value>> entries) {
  ParameterSet params;
  for (auto& [path, v] : entries) params.add(path, v);
  return params;
}

// Weighted sum with fixed random weights, so every output element gets a
// distinct upstream gradient.
inline Value probe(const Value& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Value w = random_constant(y.shape(), rng);
  return sum(mul(y, w));
}

/// Random multi-stroke trajectory. With `dyadic` set, coordinates are
/// multiples of 1/64 in [-8, 8] so sums and differences are exact.
inline Trajectory random_trajectory(std::mt19937_64& rng, std::size_t points, int strokes, bool dyadic = false) {
  std::uniform_real_distribution<double> u(-8.0, 8.0);
  std::uniform_int_distribution<int> grid(-512, 512);
  Trajectory traj;
  int stroke = 1;
  std::uniform_int_distribution<std::size_t> cut(1, points - 1);
  std::vector<bool> starts(points, false);
  for (int s = 1; s < strokes; ++s) starts[cut(rng)] = true;
  for (std::size_t i = 0; i < points; ++i) {
    if (i > 0 && starts[i]) ++stroke;
    const double p = dyadic ? grid(rng) / 64.0 : u(rng);
    const double q = dyadic ? grid(rng) / 64.0 : u(rng);
    traj.points.push_back({p, q, stroke});
  }
  return traj;
}

/// Small model used by the gradient and fusion tests.
inline ModelConfig desk_config(Fusion fusion, std::size_t classes = 2) {
  ModelConfig cfg;
  cfg.channels = 16;
  cfg.heads = 4;
  cfg.fusion = fusion;
  cfg.gat_layers = fusion == Fusion::A ? 0 : 1;
  cfg.num_classes = classes;
  cfg.head_hidden = 16;
  return cfg;
}

/// Copies every parameter `to` has from the same path in `from`.
inline void copy_shared_parameters(const Model& from, Model& to) {
  for (auto& [path, value] : to.parameters()) {
    const Value& src = from.parameters().at(path);
    std::copy(src.data().begin(), src.data().end(), value.mutable_data().begin());
  }
}

inline Value eval_logits(const Model& model, const Value& x) {
  NoGradGuard no_grad;
  ForwardContext ctx{Mode::eval, nullptr};
  return model.forward(x, ctx);
}

/// Random [T x 8] input shaped like real features (unit-circle pairs and a
/// one-hot stroke indicator).
inline Value random_features(std::size_t T, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  std::uniform_real_distribution<double> ang(-3.14159, 3.14159);
  std::bernoulli_distribution boundary(0.05);
  FeatureSequence seq;
  for (std::size_t t = 0; t < T; ++t) {
    FeatureVector f;
    f.dp = u(rng);
    f.dq = u(rng);
    const double a = ang(rng), b = ang(rng);
    f.sin_a = std::sin(a);
    f.cos_a = std::cos(a);
    f.sin_b = std::sin(b);
    f.cos_b = std::cos(b);
    const bool nb = boundary(rng);
    f.same_stroke = nb ? 0.0 : 1.0;
    f.new_stroke = nb ? 1.0 : 0.0;
    seq.push_back(f);
  }
  return features_to_value(seq);
}

inline std::vector<GlyphTemplate> shipped_templates() {
  return read_templates(std::string(AIRWRITE_DATA_DIR) + "/templates.json");
}

}  // namespace airwrite::testing
