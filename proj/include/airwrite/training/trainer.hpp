#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "airwrite/ctc/ctc.hpp"
#include "airwrite/metrics/evaluate.hpp"
#include "airwrite/model/dataset.hpp"
#include "airwrite/model/model.hpp"
#include "airwrite/training/optimizer.hpp"

namespace airwrite {

struct TrainConfig {
  double lr = 0.001;
  double lr_decay_factor = 0.01;
  int plateau_patience = 3;
  std::size_t batch_size = 8;
  int epochs = 10;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 5.0;
  // Stop once validation AR reaches this value; values above 1 never trigger.
  double target_val_ar = 2.0;

  void validate() const {
    if (!(lr > 0.0)) throw Error(ErrorKind::invalid_config, "lr must be positive");
    if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0)) {
      throw Error(ErrorKind::invalid_config, "lr_decay_factor must be in (0, 1)");
    }
    if (plateau_patience < 1) throw Error(ErrorKind::invalid_config, "plateau_patience must be >= 1");
    if (batch_size < 1) throw Error(ErrorKind::invalid_config, "batch_size must be >= 1");
    if (epochs < 1) throw Error(ErrorKind::invalid_config, "epochs must be >= 1");
    if (!(grad_clip > 0.0)) throw Error(ErrorKind::invalid_config, "grad_clip must be positive");
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},           {"lr_decay_factor", c.lr_decay_factor},
          {"plateau_patience", c.plateau_patience}, {"batch_size", c.batch_size},
          {"epochs", c.epochs},   {"seed", c.seed},
          {"beta1", c.beta1},     {"beta2", c.beta2},
          {"eps", c.eps},         {"grad_clip", c.grad_clip},
          {"target_val_ar", c.target_val_ar}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig base = {}) {
  if (!doc.is_object()) throw Error(ErrorKind::invalid_config, "train config must be an object");
  try {
    for (const auto& [key, v] : doc.items()) {
      if (key == "lr") base.lr = v.get<double>();
      else if (key == "lr_decay_factor") base.lr_decay_factor = v.get<double>();
      else if (key == "plateau_patience") base.plateau_patience = v.get<int>();
      else if (key == "batch_size") base.batch_size = v.get<std::size_t>();
      else if (key == "epochs") base.epochs = v.get<int>();
      else if (key == "seed") base.seed = v.get<std::uint64_t>();
      else if (key == "beta1") base.beta1 = v.get<double>();
      else if (key == "beta2") base.beta2 = v.get<double>();
      else if (key == "eps") base.eps = v.get<double>();
      else if (key == "grad_clip") base.grad_clip = v.get<double>();
      else if (key == "target_val_ar") base.target_val_ar = v.get<double>();
      else throw Error(ErrorKind::invalid_config, "unknown train key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_config, std::string("train config: ") + e.what());
  }
  return base;
}

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_cr = 0.0;
  double val_ar = 0.0;
  double lr = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::vector<double> step_losses;  // mean loss of every optimizer step

  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

inline nlohmann::json to_json(const TrainHistory& h) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : h.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_cr", e.val_cr},
                      {"val_ar", e.val_ar},
                      {"lr", e.lr}});
  }
  return epochs;
}

struct TrainResult {
  TrainHistory history;
  AdamState optimizer;
};

/// Raised when the loss stops being finite. The model has already been
/// rolled back to the parameters at the start of the last finished epoch.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& message, int last_good_epoch)
      : Error(ErrorKind::numeric_failure, message), last_good_epoch_(last_good_epoch) {}
  int last_good_epoch() const { return last_good_epoch_; }

 private:
  int last_good_epoch_;
};

/// Loss of one sample from its logits: cross-entropy over classes (fc
/// decoder) or CTC over per-clip posteriors (ctc decoder).
inline Value sample_loss(const Model& model, const Value& logits, const std::string& label) {
  if (model.config().decoder == Decoder::fc) return cross_entropy(logits, class_index(model.labels(), label));
  return ctc_loss(log_softmax(logits), ctc_target(model.labels(), label));
}

inline Value sample_loss(const Model& model, const Sample& sample, ForwardContext& ctx) {
  return sample_loss(model, model.forward(sample.features, ctx), sample.label);
}

/// Per-sample losses of a mini-batch forwarded together.
inline std::vector<Value> batch_losses(const Model& model, const std::vector<const Sample*>& batch,
                                       ForwardContext& ctx) {
  Batch inputs;
  for (const Sample* s : batch) inputs.push_back(features_to_value(s->features, model.min_rows()));
  Batch logits = model.forward(inputs, ctx);
  std::vector<Value> losses;
  for (std::size_t i = 0; i < batch.size(); ++i) losses.push_back(sample_loss(model, logits[i], batch[i]->label));
  return losses;
}

namespace detail {

struct ModelSnapshot {
  std::vector<std::vector<double>> params;
  std::vector<std::vector<double>> buffers;

  static ModelSnapshot take(const Model& model) {
    ModelSnapshot s;
    for (const auto& [path, v] : model.parameters()) s.params.emplace_back(v.data().begin(), v.data().end());
    model.visit_buffers([&](const std::string&, std::vector<double>& b) { s.buffers.push_back(b); });
    return s;
  }

  void restore(Model& model) const {
    std::size_t i = 0;
    for (auto& [path, v] : model.parameters()) {
      std::copy(params[i].begin(), params[i].end(), v.mutable_data().begin());
      ++i;
    }
    std::size_t j = 0;
    model.visit_buffers([&](const std::string&, std::vector<double>& b) { b = buffers[j++]; });
  }
};

}  // namespace detail

/// Builds an untrained model whose class count matches the vocabulary of
/// `corpus_labels` (plus the blank for the ctc decoder).
inline Model make_model(ModelConfig cfg, const std::vector<std::string>& corpus_labels, std::uint64_t seed) {
  auto vocab = build_vocabulary(corpus_labels, cfg.decoder);
  if (vocab.empty()) throw Error(ErrorKind::empty_input, "no labels to build a vocabulary from");
  cfg.num_classes = vocab.size() + (cfg.decoder == Decoder::ctc ? 1 : 0);
  Model model(std::move(cfg), seed);
  model.set_labels(std::move(vocab));
  return model;
}

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam training. A batch is forwarded together and its loss is
/// the mean of the per-sample losses; gradients are clipped to the
/// configured global norm before the update. After every epoch the
/// validation AR drives a plateau schedule on the learning rate.
inline TrainResult train(Model& model, const std::vector<Sample>& train_set,
                         const std::vector<Sample>& val_set, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (train_set.empty()) throw Error(ErrorKind::empty_input, "empty training set");
  if (val_set.empty()) throw Error(ErrorKind::empty_input, "empty validation set");
  if (model.labels().empty()) throw Error(ErrorKind::invalid_config, "model has no label vocabulary");

  std::mt19937_64 shuffle_rng(cfg.seed);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
  PlateauScheduler schedule(cfg.lr, cfg.lr_decay_factor, cfg.plateau_patience);
  AdamOptions adam{cfg.lr, cfg.beta1, cfg.beta2, cfg.eps};
  TrainResult result;
  ParameterSet& params = model.parameters();
  const EvalMode eval_mode = default_eval_mode(model);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  params.zero_grad();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto snapshot = detail::ModelSnapshot::take(model);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    adam.lr = schedule.lr();
    double epoch_loss = 0.0;

    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - begin);
      std::vector<const Sample*> batch;
      for (std::size_t k = begin; k < end; ++k) batch.push_back(&train_set[order[k]]);
      ForwardContext ctx{Mode::train, &dropout_rng};
      std::vector<Value> losses = batch_losses(model, batch, ctx);
      double batch_loss = 0.0;
      Value total;
      for (const auto& loss : losses) {
        batch_loss += loss.item();
        total = total.defined() ? add(total, loss) : loss;
      }
      if (!std::isfinite(batch_loss)) {
        snapshot.restore(model);
        params.zero_grad();
        throw TrainingDiverged("loss became non-finite in epoch " + std::to_string(epoch), epoch - 1);
      }
      backward(scale(total, inv_batch));
      clip_grad_norm(params, cfg.grad_clip);
      adam_step(params, result.optimizer, adam);
      params.zero_grad();
      result.history.step_losses.push_back(batch_loss * inv_batch);
      epoch_loss += batch_loss;
    }

    const MetricsReport val = evaluate_corpus(model, val_set, eval_mode);
    EpochRecord record{epoch, epoch_loss / static_cast<double>(train_set.size()), val.cr, val.ar, adam.lr};
    result.history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
    if (val.ar >= cfg.target_val_ar) break;
    schedule.step(val.ar);
  }
  return result;
}

}  // namespace airwrite
