#pragma once

#include <string>
#include <vector>

#include "airwrite/model/config.hpp"
#include "airwrite/model/layers.hpp"

namespace airwrite {

/// Multi-head graph attention over clip features on a complete graph with
/// self-loops. For head h with projection W_h and attention vector
/// a_h = [src_h ; dst_h]:
///
///   e_ij   = LeakyReLU(src_h . W_h z_i + dst_h . W_h z_j)
///   alpha  = softmax_j(e_ij)
///   out_i  = sum_j alpha_ij W_h z_j
///
/// Head outputs are concatenated back to width c and passed through PReLU.
class GraphAttentionLayer {
 public:
  GraphAttentionLayer(std::size_t channels, std::size_t heads, double attention_slope,
                      std::mt19937_64& rng)
      : heads_(heads),
        head_dim_(channels / heads),
        attention_slope_(attention_slope),
        weight_(init::uniform_fan_in({channels, channels}, channels, rng)),
        attn_src_(init::uniform_fan_in({head_dim_, heads}, 2 * head_dim_, rng)),
        attn_dst_(init::uniform_fan_in({head_dim_, heads}, 2 * head_dim_, rng)) {}

  void register_in(ParameterSet& params, const std::string& prefix) const {
    params.add(prefix + ".weight", weight_);
    params.add(prefix + ".attn_src", attn_src_);
    params.add(prefix + ".attn_dst", attn_dst_);
    act_.register_in(params, prefix + ".act");
  }

  /// z: [l x c] -> [l x c]. When `attention` is given, receives one [l x l]
  /// coefficient matrix per head.
  Value operator()(const Value& z, std::vector<Value>* attention = nullptr) const {
    const std::size_t l = z.dim(0);
    Value projected = linear(z, weight_);
    std::vector<Value> outputs;
    outputs.reserve(heads_);
    for (std::size_t h = 0; h < heads_; ++h) {
      Value wh = slice_cols(projected, h * head_dim_, (h + 1) * head_dim_);
      Value src = reshape(matmul(wh, slice_cols(attn_src_, h, h + 1)), {l});
      Value dst = reshape(matmul(wh, slice_cols(attn_dst_, h, h + 1)), {l});
      Value alpha = softmax(leaky_relu(outer_add(src, dst), attention_slope_));
      if (attention) attention->push_back(alpha);
      outputs.push_back(matmul(alpha, wh));
    }
    return act_(heads_ == 1 ? outputs.front() : concat_cols(outputs));
  }

  const Value& weight() const { return weight_; }
  const Value& attn_src() const { return attn_src_; }
  const Value& attn_dst() const { return attn_dst_; }
  const Value& slope() const { return act_.slope; }

 private:
  std::size_t heads_;
  std::size_t head_dim_;
  double attention_slope_;
  Value weight_;    // [c x c]; rows h*d .. (h+1)*d - 1 form W_h
  Value attn_src_;  // [d x heads]
  Value attn_dst_;  // [d x heads]
  PReluLayer act_;
};

/// Stack of graph attention layers: Z -> Z-bar, same shape.
class StrokeGat {
 public:
  StrokeGat(const ModelConfig& cfg, std::mt19937_64& rng) {
    if (cfg.heads == 0 || cfg.channels % cfg.heads != 0) {
      throw Error(ErrorKind::invalid_config, "channels must be divisible by heads");
    }
    for (std::size_t i = 0; i < cfg.gat_layers; ++i) {
      layers_.emplace_back(cfg.channels, cfg.heads, cfg.attention_slope, rng);
    }
  }

  void register_in(ParameterSet& params, const std::string& prefix) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i].register_in(params, prefix + "." + std::to_string(i));
    }
  }

  bool empty() const { return layers_.empty(); }
  const std::vector<GraphAttentionLayer>& layers() const { return layers_; }

  Value operator()(Value z, std::vector<Value>* attention = nullptr) const {
    if (z.rank() != 2 || z.dim(0) == 0) throw Error(ErrorKind::empty_input, "graph encoder needs [l x c], l >= 1");
    if (layers_.empty()) throw Error(ErrorKind::invalid_config, "graph encoder has no layers");
    for (const auto& layer : layers_) z = layer(z, attention);
    return z;
  }

 private:
  std::vector<GraphAttentionLayer> layers_;
};

}  // namespace airwrite
