#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "airwrite/ctc/ctc.hpp"
#include "airwrite/metrics/edit_distance.hpp"
#include "airwrite/model/dataset.hpp"
#include "airwrite/model/model.hpp"

namespace airwrite {

enum class EvalMode { character, ctc };

struct SampleResult {
  std::string truth;
  std::string prediction;
  EditStats stats;
};

struct MetricsReport {
  double cr = 0.0;
  double ar = 0.0;
  double cer = 0.0;
  EditStats total;
  std::size_t num_samples = 0;
  std::vector<SampleResult> per_sample;
};

/// Micro-averaged report: per-sample edit counts are summed first, then the
/// rates are computed once from the totals.
inline MetricsReport aggregate(std::vector<SampleResult> results) {
  if (results.empty()) throw Error(ErrorKind::empty_input, "cannot evaluate an empty corpus");
  MetricsReport report;
  for (const auto& r : results) report.total += r.stats;
  const Rates rates = cr_ar(report.total);
  report.cr = rates.cr;
  report.ar = rates.ar;
  report.cer = cer(report.total);
  report.num_samples = results.size();
  report.per_sample = std::move(results);
  return report;
}

/// Character mode compares the top-1 class with the label as length-1
/// sequences; ctc mode compares greedy-decoded symbols with the label's
/// code points.
inline MetricsReport evaluate_corpus(const Model& model, const std::vector<Sample>& samples,
                                     EvalMode mode) {
  if (samples.empty()) throw Error(ErrorKind::empty_input, "cannot evaluate an empty corpus");
  std::vector<SampleResult> results;
  results.reserve(samples.size());
  for (const auto& sample : samples) {
    SampleResult r;
    r.truth = sample.label;
    if (mode == EvalMode::character) {
      const Prediction pred = model.predict(sample.features, 1);
      r.prediction = pred.topk.front().label;
      r.stats = edit_ops(std::vector<std::string>{r.truth}, std::vector<std::string>{r.prediction});
    } else {
      const LabelSequence decoded = ctc_greedy_decode(model.frame_log_posteriors(sample.features));
      std::vector<std::string> symbols;
      for (std::size_t idx : decoded) {
        symbols.push_back(model.labels().at(idx - 1));
        r.prediction += symbols.back();
      }
      r.stats = edit_ops(utf8_symbols(r.truth), symbols);
    }
    results.push_back(std::move(r));
  }
  return aggregate(std::move(results));
}

inline EvalMode default_eval_mode(const Model& model) {
  return model.config().decoder == Decoder::ctc ? EvalMode::ctc : EvalMode::character;
}

inline nlohmann::json to_json(const MetricsReport& report, bool include_per_sample = false) {
  nlohmann::json out = {
      {"cr", report.cr},
      {"ar", report.ar},
      {"cer", report.cer},
      {"n_t", report.total.n_t},
      {"d_e", report.total.deletions},
      {"s_e", report.total.substitutions},
      {"i_e", report.total.insertions},
      {"num_samples", report.num_samples},
  };
  if (include_per_sample) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.per_sample) {
      rows.push_back({{"truth", r.truth},
                      {"prediction", r.prediction},
                      {"d_e", r.stats.deletions},
                      {"s_e", r.stats.substitutions},
                      {"i_e", r.stats.insertions}});
    }
    out["per_sample"] = rows;
  }
  return out;
}

}  // namespace airwrite
