#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "airwrite/error.hpp"
#include "airwrite/tensor/parameters.hpp"
#include "airwrite/tensor/value.hpp"

namespace airwrite {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_path;
  std::size_t worst_index = 0;
};

/// Compares the analytic gradient of a scalar function against central
/// differences for every element of every parameter. The relative error of
/// one element is |analytic - numeric| / max(1, |analytic|, |numeric|).
/// `f` must be deterministic in the parameters.
inline GradCheckResult grad_check_detailed(const std::function<Value()>& f, ParameterSet& params,
                                           double eps = 1e-5) {
  params.zero_grad();
  Value root = f();
  if (!std::isfinite(root.item())) {
    throw Error(ErrorKind::numeric_failure, "grad_check: non-finite function value");
  }
  backward(root);

  GradCheckResult result;
  for (auto& [path, value] : params) {
    auto data = value.mutable_data();
    auto grad = value.grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      double plus = 0.0;
      double minus = 0.0;
      {
        NoGradGuard no_grad;
        data[i] = saved + eps;
        plus = f().item();
        data[i] = saved - eps;
        minus = f().item();
      }
      data[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double analytic = grad[i];
      if (!std::isfinite(numeric) || !std::isfinite(analytic)) {
        throw Error(ErrorKind::numeric_failure,
                    "grad_check: non-finite gradient at " + path + "[" + std::to_string(i) + "]");
      }
      const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
      const double err = std::abs(analytic - numeric) / denom;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_path = path;
        result.worst_index = i;
      }
    }
  }
  params.zero_grad();
  return result;
}

inline double grad_check(const std::function<Value()>& f, ParameterSet& params, double eps = 1e-5) {
  return grad_check_detailed(f, params, eps).max_relative_error;
}

}  // namespace airwrite
