#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "airwrite/tensor/ops.hpp"
#include "airwrite/tensor/parameters.hpp"

namespace airwrite {

/// Per-call state threaded through a forward pass.
struct ForwardContext {
  Mode mode = Mode::eval;
  std::mt19937_64* rng = nullptr;  // required for dropout in train mode
};

using BufferVisitor = std::function<void(const std::string&, std::vector<double>&)>;

// Several samples moving through the network together. Each keeps its own
// length; only batch normalization looks across them.
using Batch = std::vector<Value>;

template <class F>
Batch map_batch(const Batch& xs, F&& f) {
  Batch out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(f(x));
  return out;
}

inline Value apply_dropout(const Value& x, double p, ForwardContext& ctx) {
  if (ctx.mode == Mode::eval || p == 0.0) return x;
  if (!ctx.rng) throw Error(ErrorKind::invalid_config, "train-mode dropout needs an rng");
  return dropout(x, p, ctx.mode, *ctx.rng);
}

struct Conv1dLayer {
  Value weight;  // [Cout x Cin x K]
  std::size_t stride = 1;
  std::size_t padding = 0;

  Conv1dLayer() = default;
  Conv1dLayer(std::size_t cin, std::size_t cout, std::size_t kernel, std::size_t stride_,
              std::size_t padding_, std::mt19937_64& rng)
      : weight(init::uniform_fan_in({cout, cin, kernel}, cin * kernel, rng)),
        stride(stride_),
        padding(padding_) {}

  void register_in(ParameterSet& params, const std::string& prefix) const {
    params.add(prefix + ".weight", weight);
  }

  Value operator()(const Value& x) const { return conv1d(x, weight, stride, padding); }
};

struct BatchNormLayer {
  Value gamma;
  Value beta;
  // Running statistics change only in train-mode passes.
  mutable BatchNormStats stats;

  BatchNormLayer() = default;
  explicit BatchNormLayer(std::size_t channels)
      : gamma(init::filled({channels}, 1.0)), beta(init::filled({channels}, 0.0)), stats(channels) {}

  void register_in(ParameterSet& params, const std::string& prefix) const {
    params.add(prefix + ".gamma", gamma);
    params.add(prefix + ".beta", beta);
  }

  void visit_buffers(const std::string& prefix, const BufferVisitor& visit) const {
    visit(prefix + ".running_mean", stats.running_mean);
    visit(prefix + ".running_var", stats.running_var);
  }

  Value operator()(const Value& x, const ForwardContext& ctx) const {
    return batch_norm1d(x, gamma, beta, stats, ctx.mode);
  }

  /// Train mode normalizes with statistics over the rows of all samples;
  /// eval mode is per row and needs no joining.
  Batch operator()(const Batch& xs, const ForwardContext& ctx) const {
    if (xs.size() == 1 || ctx.mode == Mode::eval) {
      return map_batch(xs, [&](const Value& x) { return (*this)(x, ctx); });
    }
    Value joined = (*this)(concat_rows(xs), ctx);
    Batch out;
    std::size_t row = 0;
    for (const auto& x : xs) {
      out.push_back(slice_rows(joined, row, row + x.dim(0)));
      row += x.dim(0);
    }
    return out;
  }
};

struct PReluLayer {
  Value slope;

  PReluLayer() : slope(init::filled({1}, 0.25)) {}

  void register_in(ParameterSet& params, const std::string& prefix) const {
    params.add(prefix + ".slope", slope);
  }

  Value operator()(const Value& x) const { return prelu(x, slope); }
};

struct LinearLayer {
  Value weight;  // [out x in]
  Value bias;    // [out]

  LinearLayer() = default;
  LinearLayer(std::size_t in, std::size_t out, std::mt19937_64& rng)
      : weight(init::uniform_fan_in({out, in}, in, rng)), bias(init::filled({out}, 0.0)) {}

  void register_in(ParameterSet& params, const std::string& prefix) const {
    params.add(prefix + ".weight", weight);
    params.add(prefix + ".bias", bias);
  }

  Value operator()(const Value& x) const { return linear(x, weight, bias); }
};

}  // namespace airwrite
