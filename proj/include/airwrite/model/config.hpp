#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "airwrite/error.hpp"
#include "airwrite/trajectory/features.hpp"

namespace airwrite {

enum class BlockKind { normal, reduce };

struct BlockSpec {
  BlockKind kind = BlockKind::normal;
  std::size_t stride = 1;

  friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

/// How temporal (Z) and spatial (Z-bar) clip features are combined.
///   A: temporal only, no graph encoder
///   B: graph encoder on mid-hierarchy features, added back before the last stage
///   C: classify from the graph encoder output alone
///   D: add both feature sets, mean-pool, classify
enum class Fusion { A, B, C, D };

enum class Decoder { fc, ctc };

struct ModelConfig {
  std::size_t channels = 64;
  std::vector<BlockSpec> stages = {
      {BlockKind::normal, 1}, {BlockKind::reduce, 2}, {BlockKind::normal, 1},
      {BlockKind::reduce, 2}, {BlockKind::normal, 1}, {BlockKind::reduce, 2},
  };
  std::size_t gat_layers = 1;
  std::size_t heads = 8;
  Fusion fusion = Fusion::D;
  Decoder decoder = Decoder::fc;
  std::size_t fc_layers = 2;
  std::size_t head_hidden = 128;
  std::size_t num_classes = 2;  // includes the blank symbol in ctc mode
  double dropout = 0.2;
  double attention_slope = 0.2;
  double resample_spacing = default_resample_spacing;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;

  std::size_t head_dim() const { return channels / heads; }

  /// Rows the temporal encoder needs so every stride-2 block keeps >= 1 row.
  std::size_t min_rows() const {
    std::size_t rows = 1;
    for (const auto& s : stages) rows *= s.stride;
    return rows;
  }

  /// Index of the block after which strategy B inserts the graph encoder:
  /// the end of the second downsampling stage.
  std::size_t mid_stage_end() const {
    std::size_t reductions = 0;
    for (std::size_t i = 0; i < stages.size(); ++i) {
      if (stages[i].stride == 2 && ++reductions == 2) return i + 1;
    }
    throw Error(ErrorKind::invalid_config, "fusion B needs at least two stride-2 blocks");
  }

  /// Checks invariants and applies the strategy-A rule (no graph layers).
  void validate() {
    if (channels == 0) throw Error(ErrorKind::invalid_config, "channels must be positive");
    if (heads == 0 || channels % heads != 0) {
      throw Error(ErrorKind::invalid_config, "channels (" + std::to_string(channels) +
                                                 ") must be divisible by heads (" +
                                                 std::to_string(heads) + ")");
    }
    if (stages.empty()) throw Error(ErrorKind::invalid_config, "at least one stage is required");
    for (const auto& s : stages) {
      if (s.stride != 1 && s.stride != 2) throw Error(ErrorKind::invalid_config, "stride must be 1 or 2");
      if (s.kind == BlockKind::normal && s.stride != 1) {
        throw Error(ErrorKind::invalid_config, "normal blocks cannot downsample");
      }
    }
    if (fusion == Fusion::A) gat_layers = 0;
    if (fusion != Fusion::A && gat_layers == 0) {
      throw Error(ErrorKind::invalid_config, "fusion B/C/D needs at least one graph attention layer");
    }
    if (fusion == Fusion::B) (void)mid_stage_end();
    if (fc_layers < 1 || fc_layers > 3) throw Error(ErrorKind::invalid_config, "fc_layers must be 1, 2 or 3");
    if (fc_layers > 1 && head_hidden == 0) throw Error(ErrorKind::invalid_config, "head_hidden must be positive");
    if (num_classes < (decoder == Decoder::ctc ? 2u : 1u)) {
      throw Error(ErrorKind::invalid_config, "too few classes");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorKind::invalid_probability, "dropout must be in [0, 1)");
    if (!(resample_spacing > 0.0)) throw Error(ErrorKind::invalid_config, "resample_spacing must be positive");
  }
};

inline std::string to_string(Fusion f) {
  switch (f) {
    case Fusion::A: return "A";
    case Fusion::B: return "B";
    case Fusion::C: return "C";
    case Fusion::D: return "D";
  }
  return "?";
}

inline Fusion fusion_from_string(const std::string& s) {
  if (s == "A") return Fusion::A;
  if (s == "B") return Fusion::B;
  if (s == "C") return Fusion::C;
  if (s == "D") return Fusion::D;
  throw Error(ErrorKind::invalid_config, "unknown fusion strategy '" + s + "'");
}

inline nlohmann::json to_json(const ModelConfig& cfg) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : cfg.stages) {
    stages.push_back({{"kind", s.kind == BlockKind::normal ? "normal" : "reduce"}, {"stride", s.stride}});
  }
  return {
      {"channels", cfg.channels},
      {"stages", stages},
      {"gat_layers", cfg.gat_layers},
      {"heads", cfg.heads},
      {"fusion", to_string(cfg.fusion)},
      {"decoder", cfg.decoder == Decoder::fc ? "fc" : "ctc"},
      {"fc_layers", cfg.fc_layers},
      {"head_hidden", cfg.head_hidden},
      {"num_classes", cfg.num_classes},
      {"dropout", cfg.dropout},
      {"attention_slope", cfg.attention_slope},
      {"resample_spacing", cfg.resample_spacing},
  };
}

/// Reads the keys present in `doc` over `base`; unknown keys are rejected.
inline ModelConfig model_config_from_json(const nlohmann::json& doc, ModelConfig base = {}) {
  static const std::set<std::string> known = {
      "channels", "stages", "gat_layers", "heads", "fusion", "decoder", "fc_layers",
      "head_hidden", "num_classes", "dropout", "attention_slope", "resample_spacing"};
  if (!doc.is_object()) throw Error(ErrorKind::invalid_config, "model config must be an object");
  try {
    for (const auto& [key, value] : doc.items()) {
      if (!known.count(key)) throw Error(ErrorKind::invalid_config, "unknown model key '" + key + "'");
      if (key == "channels") base.channels = value.get<std::size_t>();
      else if (key == "gat_layers") base.gat_layers = value.get<std::size_t>();
      else if (key == "heads") base.heads = value.get<std::size_t>();
      else if (key == "fusion") base.fusion = fusion_from_string(value.get<std::string>());
      else if (key == "decoder") {
        const auto d = value.get<std::string>();
        if (d != "fc" && d != "ctc") throw Error(ErrorKind::invalid_config, "decoder must be fc or ctc");
        base.decoder = d == "fc" ? Decoder::fc : Decoder::ctc;
      } else if (key == "fc_layers") base.fc_layers = value.get<std::size_t>();
      else if (key == "head_hidden") base.head_hidden = value.get<std::size_t>();
      else if (key == "num_classes") base.num_classes = value.get<std::size_t>();
      else if (key == "dropout") base.dropout = value.get<double>();
      else if (key == "attention_slope") base.attention_slope = value.get<double>();
      else if (key == "resample_spacing") base.resample_spacing = value.get<double>();
      else if (key == "stages") {
        base.stages.clear();
        for (const auto& s : value) {
          const auto kind = s.at("kind").get<std::string>();
          if (kind != "normal" && kind != "reduce") {
            throw Error(ErrorKind::invalid_config, "block kind must be normal or reduce");
          }
          base.stages.push_back({kind == "normal" ? BlockKind::normal : BlockKind::reduce,
                                 s.value("stride", std::size_t{1})});
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_config, std::string("model config: ") + e.what());
  }
  return base;
}

}  // namespace airwrite
