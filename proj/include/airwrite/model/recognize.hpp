#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "airwrite/ctc/ctc.hpp"
#include "airwrite/model/model.hpp"
#include "airwrite/trajectory/features.hpp"

namespace airwrite {

/// Raw trajectory to ranked candidates: normalize, resample, extract
/// features, eval-mode forward. With the ctc decoder there is a single
/// candidate, the greedy decoding, scored by its best-path probability.
inline std::vector<Candidate> recognize(const Model& model, const Trajectory& traj, std::size_t topk) {
  if (traj.size() < 3) {
    throw Error(ErrorKind::too_short, "need at least 3 points, got " + std::to_string(traj.size()));
  }
  const FeatureSequence seq = prepare_features(traj, model.config().resample_spacing);
  if (model.config().decoder == Decoder::fc) return model.predict(seq, topk).topk;

  const Value logp = model.frame_log_posteriors(seq);
  const std::size_t V = logp.dim(1);
  double best_path = 0.0;
  for (std::size_t t = 0; t < logp.dim(0); ++t) {
    auto row = logp.data().subspan(t * V, V);
    best_path += *std::max_element(row.begin(), row.end());
  }
  std::string text;
  for (std::size_t idx : ctc_greedy_decode(logp)) text += model.labels().at(idx - 1);
  if (topk == 0) return {};
  return {Candidate{0, text, std::exp(best_path)}};
}

}  // namespace airwrite
