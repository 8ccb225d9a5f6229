#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "airwrite/error.hpp"
#include "airwrite/tensor/parameters.hpp"

namespace airwrite {

struct AdamOptions {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::uint64_t step = 0;
  std::map<std::string, std::vector<double>> first_moment;
  std::map<std::string, std::vector<double>> second_moment;
};

/// One bias-corrected Adam update from the gradients currently stored in
/// `params`. Gradients are left untouched.
inline void adam_step(ParameterSet& params, AdamState& state, const AdamOptions& opt) {
  for (const auto& [path, value] : params) {
    for (double g : value.grad()) {
      if (!std::isfinite(g)) throw Error(ErrorKind::numeric_failure, "non-finite gradient in '" + path + "'");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  for (auto& [path, value] : params) {
    auto& m = state.first_moment[path];
    auto& v = state.second_moment[path];
    if (m.size() != value.size()) {
      m.assign(value.size(), 0.0);
      v.assign(value.size(), 0.0);
    }
    auto data = value.mutable_data();
    auto grad = value.grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * grad[i];
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      data[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
    }
  }
}

/// Scales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
inline double clip_grad_norm(ParameterSet& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [path, value] : params)
    for (double g : value.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double k = max_norm / norm;
    for (auto& [path, value] : params)
      for (double& g : value.mutable_grad()) g *= k;
  }
  return norm;
}

/// Multiplies the learning rate by `factor` once the monitored metric has
/// not improved for `patience` consecutive epochs, then starts counting again.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, int patience) : lr_(lr), factor_(factor), patience_(patience) {
    if (!(lr > 0.0)) throw Error(ErrorKind::invalid_config, "learning rate must be positive");
    if (!(factor > 0.0 && factor < 1.0)) throw Error(ErrorKind::invalid_config, "decay factor must be in (0, 1)");
    if (patience < 1) throw Error(ErrorKind::invalid_config, "patience must be at least 1");
  }

  /// Feeds one epoch's metric (higher is better); returns true if it decayed.
  bool step(double metric) {
    if (metric > best_) {
      best_ = metric;
      wait_ = 0;
      return false;
    }
    if (++wait_ >= patience_) {
      lr_ *= factor_;
      wait_ = 0;
      return true;
    }
    return false;
  }

  double lr() const { return lr_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  double best_ = -std::numeric_limits<double>::infinity();
  int wait_ = 0;
};

}  // namespace airwrite
