#pragma once

// Command-line front end: train | eval | recognize | synth | serve.
//
// Exit status: 0 success, 1 usage or config error, 2 data error (missing or
// malformed files, bad checkpoints), 3 numeric failure.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "airwrite/metrics/evaluate.hpp"
#include "airwrite/model/recognize.hpp"
#include "airwrite/service/service.hpp"
#include "airwrite/training/checkpoint.hpp"
#include "airwrite/training/trainer.hpp"
#include "airwrite/trajectory/io.hpp"
#include "airwrite/trajectory/synth.hpp"

namespace airwrite::cli {

enum ExitCode : int { ok = 0, usage = 1, data = 2, numeric = 3 };

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_config: return usage;
    case ErrorKind::numeric_failure: return numeric;
    default: return data;
  }
}

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
};

/// Merges a config document ({"model": {...}, "train": {...}}) with
/// `section.key=value` overrides; overrides win. Values are parsed as JSON
/// and fall back to plain strings.
inline RunConfig resolve_config(nlohmann::json doc, const std::vector<std::string>& overrides) {
  if (doc.is_null()) doc = nlohmann::json::object();
  if (!doc.is_object()) throw Error(ErrorKind::invalid_config, "config must be a JSON object");
  for (const auto& [key, v] : doc.items()) {
    if (key != "model" && key != "train") throw Error(ErrorKind::invalid_config, "unknown config key '" + key + "'");
  }
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    const auto dot = item.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw Error(ErrorKind::invalid_config, "override '" + item + "' is not section.key=value");
    }
    const std::string section = item.substr(0, dot);
    const std::string key = item.substr(dot + 1, eq - dot - 1);
    const std::string text = item.substr(eq + 1);
    if (section != "model" && section != "train") {
      throw Error(ErrorKind::invalid_config, "unknown config section '" + section + "'");
    }
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    doc[section][key] = value;
  }
  RunConfig cfg;
  if (doc.contains("model")) cfg.model = model_config_from_json(doc.at("model"));
  if (doc.contains("train")) cfg.train = train_config_from_json(doc.at("train"));
  return cfg;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, "'" + path + "': " + e.what());
  }
}

namespace detail {

struct TrainArgs {
  std::string corpus, val, out, history, config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
};

inline int run_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  nlohmann::json doc = a.config.empty() ? nlohmann::json::object() : read_json_file(a.config);
  RunConfig cfg = resolve_config(std::move(doc), a.overrides);
  if (a.seed) cfg.train.seed = *a.seed;
  if (a.epochs) cfg.train.epochs = *a.epochs;
  cfg.train.validate();

  std::vector<Trajectory> train_corpus = read_corpus(a.corpus);
  std::vector<Trajectory> val_corpus;
  if (a.val.empty()) {
    auto split = split_corpus(train_corpus, 0.9, 0.1, cfg.train.seed);
    train_corpus = std::move(split.train);
    val_corpus = std::move(split.val);
  } else {
    val_corpus = read_corpus(a.val);
  }
  std::vector<std::string> labels;
  for (const auto& t : train_corpus) labels.push_back(t.label.value_or(""));
  Model model = make_model(cfg.model, labels, cfg.train.seed);

  const double spacing = model.config().resample_spacing;
  const auto train_set = prepare_dataset(train_corpus, spacing);
  const auto val_set = prepare_dataset(val_corpus, spacing);
  err << "training on " << train_set.size() << " samples, validating on " << val_set.size() << ", "
      << model.parameters().element_count() << " parameters\n";

  TrainResult result;
  try {
    result = train(model, train_set, val_set, cfg.train, [&](const EpochRecord& r) {
      err << "epoch " << r.epoch << " loss " << r.train_loss << " val_cr " << r.val_cr << " val_ar " << r.val_ar
          << " lr " << r.lr << '\n';
    });
  } catch (const TrainingDiverged& e) {
    err << e.what() << " (last good epoch " << e.last_good_epoch() << ")\n";
    return numeric;
  }

  const nlohmann::json history = to_json(result.history);
  CheckpointMetadata meta;
  meta.epoch = result.history.epochs.empty() ? 0 : result.history.epochs.back().epoch;
  meta.seed = cfg.train.seed;
  meta.history = history;
  save_checkpoint(model, a.out, meta, &result.optimizer);

  const std::string history_path = a.history.empty() ? a.out + ".history.json" : a.history;
  std::ofstream hist(history_path);
  if (!hist) throw Error(ErrorKind::io, "cannot write history '" + history_path + "'");
  hist << nlohmann::json{{"model", to_json(model.config())},
                         {"train", to_json(cfg.train)},
                         {"epochs", history},
                         {"step_losses", result.history.step_losses}}
              .dump(2)
       << '\n';

  const auto& last = result.history.epochs.back();
  out << nlohmann::json{{"checkpoint", a.out},
                        {"history", history_path},
                        {"epochs", last.epoch},
                        {"val_cr", last.val_cr},
                        {"val_ar", last.val_ar}}
             .dump()
      << '\n';
  return ok;
}

}  // namespace detail

/// Runs one invocation. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"air-writing character recognition"};
  app.require_subcommand(1);

  detail::TrainArgs ta;
  std::uint64_t train_seed = 0;
  int train_epochs = 0;
  auto* train_cmd = app.add_subcommand("train", "train a model on a labelled JSONL corpus");
  train_cmd->add_option("--corpus", ta.corpus, "training corpus (JSONL)")->required();
  train_cmd->add_option("--val", ta.val, "validation corpus; default: 10% stratified split of --corpus");
  train_cmd->add_option("--out", ta.out, "checkpoint path")->required();
  train_cmd->add_option("--history", ta.history, "history JSON path (default: <out>.history.json)");
  train_cmd->add_option("--config", ta.config, "JSON config {\"model\": {...}, \"train\": {...}}");
  train_cmd->add_option("--set", ta.overrides, "override, e.g. model.fusion=A or train.lr=0.01");
  auto* seed_opt = train_cmd->add_option("--seed", train_seed, "training seed (overrides config)");
  auto* epochs_opt = train_cmd->add_option("--epochs", train_epochs, "epoch budget (overrides config)");

  std::string eval_ckpt, eval_corpus;
  bool per_sample = false;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a labelled corpus");
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint")->required();
  eval_cmd->add_option("--corpus", eval_corpus, "corpus (JSONL)")->required();
  eval_cmd->add_flag("--per-sample", per_sample, "include per-sample results");

  std::string rec_ckpt, rec_traj;
  std::size_t rec_topk = default_topk;
  auto* rec_cmd = app.add_subcommand("recognize", "top-k candidates for one trajectory");
  rec_cmd->add_option("--ckpt", rec_ckpt, "checkpoint")->required();
  rec_cmd->add_option("--traj", rec_traj, "trajectory JSON (corpus line or {\"points\": ...})")->required();
  rec_cmd->add_option("--topk", rec_topk, "number of candidates")->check(CLI::Range(1, 1000));

  std::string syn_templates = std::string(AIRWRITE_DATA_DIR) + "/templates.json";
  std::string syn_out;
  int per_class = 100;
  std::uint64_t syn_seed = 0;
  SynthOptions syn_opts;
  auto* syn_cmd = app.add_subcommand("synth", "generate a synthetic corpus from glyph templates");
  syn_cmd->add_option("--templates", syn_templates, "template JSON")->capture_default_str();
  syn_cmd->add_option("--per-class", per_class, "samples per class")->check(CLI::PositiveNumber)->capture_default_str();
  syn_cmd->add_option("--seed", syn_seed, "generator seed")->capture_default_str();
  syn_cmd->add_option("--out", syn_out, "output JSONL (default: standard output)");
  syn_cmd->add_option("--noise", syn_opts.noise, "point jitter (unit-square units)")->capture_default_str();

  ServeOptions serve_opts;
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP recognition service");
  serve_cmd->add_option("--ckpt", serve_opts.checkpoint, "checkpoint")->required();
  serve_cmd->add_option("--port", serve_opts.port, "port")->capture_default_str();
  serve_cmd->add_option("--host", serve_opts.host, "bind address")->capture_default_str();
  serve_cmd->add_option("--static", serve_opts.static_dir, "directory served under /");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    for (auto* sub : app.get_subcommands()) err << sub->help();
    return usage;
  }

  try {
    if (*train_cmd) {
      if (*seed_opt) ta.seed = train_seed;
      if (*epochs_opt) ta.epochs = train_epochs;
      return detail::run_train(ta, out, err);
    }
    if (*eval_cmd) {
      const LoadedCheckpoint ckpt = load_checkpoint(eval_ckpt);
      const auto samples = prepare_dataset(read_corpus(eval_corpus), ckpt.model.config().resample_spacing);
      const MetricsReport report = evaluate_corpus(ckpt.model, samples, default_eval_mode(ckpt.model));
      out << to_json(report, per_sample).dump() << '\n';
      return ok;
    }
    if (*rec_cmd) {
      const LoadedCheckpoint ckpt = load_checkpoint(rec_ckpt);
      const Trajectory traj = trajectory_from_json(read_json_file(rec_traj));
      nlohmann::json candidates = nlohmann::json::array();
      for (const auto& c : recognize(ckpt.model, traj, rec_topk)) {
        candidates.push_back({{"label", c.label}, {"prob", c.prob}});
      }
      out << nlohmann::json{{"candidates", candidates}}.dump() << '\n';
      return ok;
    }
    if (*syn_cmd) {
      const auto corpus = synth_generate(read_templates(syn_templates), per_class, syn_seed, syn_opts);
      if (syn_out.empty()) {
        write_corpus(out, corpus);
      } else {
        write_corpus(syn_out, corpus);
        err << "wrote " << corpus.size() << " samples to " << syn_out << '\n';
      }
      return ok;
    }
    if (*serve_cmd) {
      httplib::Server server;
      RecognitionService service;
      if (!serve(serve_opts, server, service)) {
        err << "error: cannot bind " << serve_opts.host << ':' << serve_opts.port << '\n';
        return data;
      }
      return ok;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return data;
  }
  return usage;
}

inline int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args);
}

}  // namespace airwrite::cli
