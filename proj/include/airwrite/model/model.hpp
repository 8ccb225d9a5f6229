#pragma once

#include <algorithm>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "airwrite/model/config.hpp"
#include "airwrite/model/layers.hpp"
#include "airwrite/model/stroke_gat.hpp"
#include "airwrite/model/temporal_encoder.hpp"
#include "airwrite/trajectory/features.hpp"

namespace airwrite {

/// 1-3 fully connected layers with PReLU and dropout between them. Applied
/// to a pooled [c] vector (fc decoder) or row-wise to [l x c] (ctc decoder).
class DecoderHead {
 public:
  DecoderHead(const ModelConfig& cfg, std::mt19937_64& rng) : dropout_(cfg.dropout) {
    std::size_t in = cfg.channels;
    for (std::size_t i = 0; i + 1 < cfg.fc_layers; ++i) {
      layers_.emplace_back(in, cfg.head_hidden, rng);
      acts_.emplace_back();
      in = cfg.head_hidden;
    }
    layers_.emplace_back(in, cfg.num_classes, rng);
  }

  void register_in(ParameterSet& params, const std::string& prefix) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i].register_in(params, prefix + ".fc" + std::to_string(i));
      if (i < acts_.size()) acts_[i].register_in(params, prefix + ".act" + std::to_string(i));
    }
  }

  Value operator()(Value x, ForwardContext& ctx) const {
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
      x = apply_dropout(acts_[i](layers_[i](x)), dropout_, ctx);
    }
    return layers_.back()(x);
  }

 private:
  double dropout_;
  std::vector<LinearLayer> layers_;
  std::vector<PReluLayer> acts_;
};

struct Candidate {
  std::size_t index = 0;
  std::string label;
  double prob = 0.0;
};

struct Prediction {
  std::vector<double> probabilities;
  std::vector<Candidate> topk;

  std::size_t top1() const { return topk.empty() ? 0 : topk.front().index; }
};

/// Probabilities sorted descending; ties keep the lower class index first.
inline std::vector<Candidate> rank_candidates(const std::vector<double>& probs, std::size_t k,
                                              const std::vector<std::string>& labels) {
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  k = std::min(k, probs.size());
  std::vector<Candidate> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t idx = order[i];
    out.push_back({idx, idx < labels.size() ? labels[idx] : std::to_string(idx), probs[idx]});
  }
  return out;
}

/// Temporal encoder f_r, graph encoder f_g and decoder f_c wired per the
/// configured fusion strategy. Strategy D computes
///   p = FC( (1/l) * sum_i (z-bar_i + z_i) ),  Z = f_r(x),  Z-bar = f_g(Z)
/// with f_r evaluated once.
class Model {
 public:
  explicit Model(ModelConfig cfg, std::uint64_t seed = 0) : cfg_(validated(std::move(cfg))) {
    std::mt19937_64 rng(seed);
    temporal_ = std::make_unique<TemporalEncoder>(cfg_, rng);
    gat_ = std::make_unique<StrokeGat>(cfg_, rng);
    head_ = std::make_unique<DecoderHead>(cfg_, rng);
    temporal_->register_in(params_, "temporal");
    gat_->register_in(params_, "gat");
    head_->register_in(params_, "head");
  }

  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  const StrokeGat& graph_encoder() const { return *gat_; }

  /// Class labels in index order. In ctc mode index 0 is the blank and
  /// labels cover indices 1..num_classes-1.
  const std::vector<std::string>& labels() const { return labels_; }
  void set_labels(std::vector<std::string> labels) {
    const std::size_t expected = cfg_.decoder == Decoder::ctc ? cfg_.num_classes - 1 : cfg_.num_classes;
    if (labels.size() != expected) {
      throw Error(ErrorKind::invalid_config, "expected " + std::to_string(expected) + " labels, got " +
                                                 std::to_string(labels.size()));
    }
    labels_ = std::move(labels);
  }

  void visit_buffers(const BufferVisitor& visit) const { temporal_->visit_buffers("temporal", visit); }

  std::size_t min_rows() const { return cfg_.min_rows(); }

  /// Z = f_r(x): [T x 8] -> [l x c].
  Value temporal_encode(const Value& x, ForwardContext& ctx) const {
    if (x.rank() != 2 || x.dim(0) == 0) throw Error(ErrorKind::empty_input, "empty feature sequence");
    return (*temporal_)(x, ctx);
  }

  /// Z-bar = f_g(Z).
  Value stroke_gat_encode(const Value& z, std::vector<Value>* attention = nullptr) const {
    return (*gat_)(z, attention);
  }

  /// Fuses clip features and decodes them. `zbar` is ignored (and may be
  /// undefined) for strategies A and B. Returns logits: [num_classes] for the
  /// fc decoder, [l x num_classes] for the ctc decoder.
  Value fuse_and_classify(const Value& z, const Value& zbar, ForwardContext& ctx) const {
    Value fused;
    switch (cfg_.fusion) {
      case Fusion::A:
      case Fusion::B:
        fused = z;
        break;
      case Fusion::C:
        fused = zbar;
        break;
      case Fusion::D:
        if (!zbar.defined() || zbar.shape() != z.shape()) {
          throw Error(ErrorKind::invalid_shape, "fusion D needs Z and Z-bar of equal shape");
        }
        fused = add(zbar, z);
        break;
    }
    if (cfg_.decoder == Decoder::ctc) return (*head_)(fused, ctx);
    return (*head_)(mean_rows(fused), ctx);
  }

  /// Logits for several feature matrices passed through together (train-mode
  /// batch norm shares statistics across them). Inputs shorter than min_rows
  /// are padded by repeating their last row.
  Batch forward(const Batch& xs, ForwardContext& ctx) const {
    Batch inputs = map_batch(xs, [&](const Value& x) {
      if (x.rank() != 2 || x.dim(0) == 0) throw Error(ErrorKind::empty_input, "empty feature sequence");
      return x.dim(0) >= min_rows() ? x : pad_rows(x, min_rows());
    });
    if (cfg_.fusion == Fusion::B) {
      const std::size_t mid = cfg_.mid_stage_end();
      Batch h = temporal_->run_blocks(temporal_->stem(inputs, ctx), 0, mid, ctx);
      h = map_batch(h, [&](const Value& v) { return add(v, stroke_gat_encode(v)); });
      Batch z = temporal_->run_blocks(h, mid, temporal_->block_count(), ctx);
      return map_batch(z, [&](const Value& v) { return fuse_and_classify(v, Value(), ctx); });
    }
    Batch z = (*temporal_)(inputs, ctx);
    return map_batch(z, [&](const Value& v) {
      return fuse_and_classify(v, cfg_.fusion == Fusion::A ? Value() : stroke_gat_encode(v), ctx);
    });
  }

  Value forward(const Value& x, ForwardContext& ctx) const { return forward(Batch{x}, ctx).front(); }

  Value forward(const FeatureSequence& seq, ForwardContext& ctx) const {
    return forward(features_to_value(seq, min_rows()), ctx);
  }

  /// Eval-mode class probabilities and the top-k candidates (fc decoder).
  Prediction predict(const FeatureSequence& seq, std::size_t topk = 5) const {
    if (cfg_.decoder != Decoder::fc) throw Error(ErrorKind::invalid_config, "predict needs the fc decoder");
    NoGradGuard no_grad;
    ForwardContext ctx{Mode::eval, nullptr};
    Value probs = softmax(forward(seq, ctx));
    Prediction pred;
    pred.probabilities.assign(probs.data().begin(), probs.data().end());
    pred.topk = rank_candidates(pred.probabilities, topk, labels_);
    return pred;
  }

  /// Eval-mode per-clip log posteriors [l x num_classes] (ctc decoder).
  Value frame_log_posteriors(const FeatureSequence& seq) const {
    if (cfg_.decoder != Decoder::ctc) throw Error(ErrorKind::invalid_config, "ctc decoder required");
    NoGradGuard no_grad;
    ForwardContext ctx{Mode::eval, nullptr};
    return log_softmax(forward(seq, ctx));
  }

 private:
  static ModelConfig validated(ModelConfig cfg) {
    cfg.validate();
    return cfg;
  }

  static Value pad_rows(const Value& x, std::size_t rows) {
    const std::size_t width = x.dim(1);
    std::vector<double> data(x.data().begin(), x.data().end());
    const std::vector<double> last(data.end() - static_cast<std::ptrdiff_t>(width), data.end());
    while (data.size() < rows * width) data.insert(data.end(), last.begin(), last.end());
    return Value::constant({rows, width}, std::move(data));
  }

  ModelConfig cfg_;
  ParameterSet params_;
  std::vector<std::string> labels_;
  std::unique_ptr<TemporalEncoder> temporal_;
  std::unique_ptr<StrokeGat> gat_;
  std::unique_ptr<DecoderHead> head_;
};

}  // namespace airwrite
