#pragma once

#include <string>
#include <vector>

#include "airwrite/model/config.hpp"
#include "airwrite/model/layers.hpp"

namespace airwrite {

// Residual 1-D conv block. A normal block keeps width and length; a reduce
// block adds a 1x1 projection branch and may halve the time axis.
//
//   main: conv(k3, stride) -> bn -> prelu -> dropout -> conv(k3) -> bn
//   skip: identity (normal) | conv(k1, stride) -> bn (reduce)
//   out:  prelu(main + skip)
class ResidualBlock {
 public:
  ResidualBlock(BlockSpec spec, std::size_t cin, std::size_t cout, double dropout,
                std::mt19937_64& rng)
      : spec_(spec),
        dropout_(dropout),
        conv1_(cin, cout, 3, spec.stride, 1, rng),
        bn1_(cout),
        conv2_(cout, cout, 3, 1, 1, rng),
        bn2_(cout) {
    if (spec.kind == BlockKind::reduce) {
      proj_ = Conv1dLayer(cin, cout, 1, spec.stride, 0, rng);
      proj_bn_ = BatchNormLayer(cout);
    }
  }

  void register_in(ParameterSet& params, const std::string& prefix) const {
    conv1_.register_in(params, prefix + ".conv1");
    bn1_.register_in(params, prefix + ".bn1");
    act1_.register_in(params, prefix + ".act1");
    conv2_.register_in(params, prefix + ".conv2");
    bn2_.register_in(params, prefix + ".bn2");
    if (spec_.kind == BlockKind::reduce) {
      proj_.register_in(params, prefix + ".proj");
      proj_bn_.register_in(params, prefix + ".proj_bn");
    }
    act_out_.register_in(params, prefix + ".act_out");
  }

  void visit_buffers(const std::string& prefix, const BufferVisitor& visit) const {
    bn1_.visit_buffers(prefix + ".bn1", visit);
    bn2_.visit_buffers(prefix + ".bn2", visit);
    if (spec_.kind == BlockKind::reduce) proj_bn_.visit_buffers(prefix + ".proj_bn", visit);
  }

  Batch operator()(const Batch& xs, ForwardContext& ctx) const {
    Batch h = map_batch(bn1_(map_batch(xs, conv1_), ctx), act1_);
    h = map_batch(h, [&](const Value& v) { return apply_dropout(v, dropout_, ctx); });
    h = bn2_(map_batch(h, conv2_), ctx);
    Batch skip = spec_.kind == BlockKind::reduce ? proj_bn_(map_batch(xs, proj_), ctx) : xs;
    Batch out;
    for (std::size_t i = 0; i < xs.size(); ++i) out.push_back(act_out_(add(h[i], skip[i])));
    return out;
  }

 private:
  BlockSpec spec_;
  double dropout_;
  Conv1dLayer conv1_;
  BatchNormLayer bn1_;
  PReluLayer act1_;
  Conv1dLayer conv2_;
  BatchNormLayer bn2_;
  Conv1dLayer proj_;
  BatchNormLayer proj_bn_;
  PReluLayer act_out_;
};

/// Stem conv (8 -> c) followed by the configured residual blocks. Maps each
/// [T x 8] feature matrix to [l x c] clip features.
class TemporalEncoder {
 public:
  TemporalEncoder(const ModelConfig& cfg, std::mt19937_64& rng)
      : stem_conv_(FeatureVector::width, cfg.channels, 3, 1, 1, rng), stem_bn_(cfg.channels) {
    for (const auto& spec : cfg.stages) {
      blocks_.emplace_back(spec, cfg.channels, cfg.channels, cfg.dropout, rng);
    }
  }

  void register_in(ParameterSet& params, const std::string& prefix) const {
    stem_conv_.register_in(params, prefix + ".stem.conv");
    stem_bn_.register_in(params, prefix + ".stem.bn");
    stem_act_.register_in(params, prefix + ".stem.act");
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      blocks_[i].register_in(params, prefix + ".block" + std::to_string(i));
    }
  }

  void visit_buffers(const std::string& prefix, const BufferVisitor& visit) const {
    stem_bn_.visit_buffers(prefix + ".stem.bn", visit);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      blocks_[i].visit_buffers(prefix + ".block" + std::to_string(i), visit);
    }
  }

  std::size_t block_count() const { return blocks_.size(); }

  Batch stem(const Batch& xs, ForwardContext& ctx) const {
    return map_batch(stem_bn_(map_batch(xs, stem_conv_), ctx), stem_act_);
  }

  /// Runs blocks [begin, end) on already-stemmed features.
  Batch run_blocks(Batch h, std::size_t begin, std::size_t end, ForwardContext& ctx) const {
    for (std::size_t i = begin; i < end; ++i) h = blocks_[i](h, ctx);
    return h;
  }

  Batch operator()(const Batch& xs, ForwardContext& ctx) const {
    return run_blocks(stem(xs, ctx), 0, blocks_.size(), ctx);
  }

  Value operator()(const Value& x, ForwardContext& ctx) const { return (*this)(Batch{x}, ctx).front(); }

 private:
  Conv1dLayer stem_conv_;
  BatchNormLayer stem_bn_;
  PReluLayer stem_act_;
  std::vector<ResidualBlock> blocks_;
};

}  // namespace airwrite
