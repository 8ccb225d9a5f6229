#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "airwrite/ctc/ctc.hpp"
#include "airwrite/model/config.hpp"
#include "airwrite/trajectory/features.hpp"

namespace airwrite {

/// Splits a UTF-8 string into code points (each returned as its own string).
/// Invalid lead bytes are kept as single-byte symbols.
inline std::vector<std::string> utf8_symbols(const std::string& text) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < text.size();) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if ((lead & 0xE0) == 0xC0) len = 2;
    else if ((lead & 0xF0) == 0xE0) len = 3;
    else if ((lead & 0xF8) == 0xF0) len = 4;
    len = std::min(len, text.size() - i);
    out.push_back(text.substr(i, len));
    i += len;
  }
  return out;
}

/// Class vocabulary for a labelled corpus, sorted. The fc decoder uses whole
/// labels as classes; the ctc decoder uses their code points (blank excluded).
inline std::vector<std::string> build_vocabulary(const std::vector<std::string>& labels, Decoder decoder) {
  std::set<std::string> unique;
  for (const auto& label : labels) {
    if (decoder == Decoder::fc) {
      unique.insert(label);
    } else {
      for (auto& sym : utf8_symbols(label)) unique.insert(sym);
    }
  }
  return {unique.begin(), unique.end()};
}

inline std::size_t class_index(const std::vector<std::string>& vocab, const std::string& label) {
  auto it = std::lower_bound(vocab.begin(), vocab.end(), label);
  if (it == vocab.end() || *it != label) {
    throw Error(ErrorKind::parse, "label '" + label + "' is not in the vocabulary");
  }
  return static_cast<std::size_t>(it - vocab.begin());
}

/// ctc target indices (shifted by one for the blank).
inline LabelSequence ctc_target(const std::vector<std::string>& vocab, const std::string& label) {
  LabelSequence out;
  for (const auto& sym : utf8_symbols(label)) out.push_back(class_index(vocab, sym) + 1);
  return out;
}

/// A preprocessed, labelled example.
struct Sample {
  FeatureSequence features;
  std::string label;
};

inline std::vector<Sample> prepare_dataset(const std::vector<Trajectory>& corpus, double spacing) {
  std::vector<Sample> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    try {
      out.push_back({prepare_features(corpus[i], spacing), corpus[i].label.value_or("")});
    } catch (const Error& e) {
      throw Error(e.kind(), "sample " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

struct CorpusSplit {
  std::vector<Trajectory> train;
  std::vector<Trajectory> val;
  std::vector<Trajectory> test;
};

/// Stratified split: each label's samples are shuffled with `seed` and cut
/// into train/val/test by rounded fractions; the test share takes the rest.
/// Output keeps corpus order within each part.
inline CorpusSplit split_corpus(const std::vector<Trajectory>& corpus, double train_frac, double val_frac,
                                std::uint64_t seed) {
  if (train_frac < 0.0 || val_frac < 0.0 || train_frac + val_frac > 1.0 + 1e-12) {
    throw Error(ErrorKind::invalid_config, "split fractions must be non-negative and sum to at most 1");
  }
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < corpus.size(); ++i) by_label[corpus[i].label.value_or("")].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<int> part(corpus.size(), 2);
  for (auto& [label, idx] : by_label) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n = static_cast<double>(idx.size());
    const auto n_train = static_cast<std::size_t>(std::llround(n * train_frac));
    const auto n_val = std::min(idx.size() - n_train, static_cast<std::size_t>(std::llround(n * val_frac)));
    for (std::size_t k = 0; k < idx.size(); ++k) part[idx[k]] = k < n_train ? 0 : (k < n_train + n_val ? 1 : 2);
  }
  CorpusSplit out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    (part[i] == 0 ? out.train : part[i] == 1 ? out.val : out.test).push_back(corpus[i]);
  }
  return out;
}

}  // namespace airwrite
