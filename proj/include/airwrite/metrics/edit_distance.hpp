#pragma once

#include <algorithm>
#include <cstddef>
#include <iterator>
#include <type_traits>
#include <utility>
#include <vector>

#include "airwrite/error.hpp"

namespace airwrite {

/// Alignment counts between a ground truth of length n_t and a prediction.
struct EditStats {
  std::size_t deletions = 0;      // D_e: ground-truth symbols missing from the prediction
  std::size_t substitutions = 0;  // S_e
  std::size_t insertions = 0;     // I_e: extra predicted symbols
  std::size_t n_t = 0;            // ground-truth length

  std::size_t distance() const { return deletions + substitutions + insertions; }

  EditStats& operator+=(const EditStats& o) {
    deletions += o.deletions;
    substitutions += o.substitutions;
    insertions += o.insertions;
    n_t += o.n_t;
    return *this;
  }

  friend bool operator==(const EditStats&, const EditStats&) = default;
};

/// Unit-cost minimal alignment. Among alignments of minimal distance the one
/// with the fewest insertions plus deletions wins, so the (D, S, I) split is
/// unique and swapping the arguments swaps D and I.
template <class Seq>
EditStats edit_ops(const Seq& truth, const Seq& pred) {
  const std::vector<std::decay_t<decltype(*std::begin(truth))>> a(std::begin(truth), std::end(truth));
  const std::vector<std::decay_t<decltype(*std::begin(pred))>> b(std::begin(pred), std::end(pred));
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  // (distance, indels), compared lexicographically.
  using Cost = std::pair<std::size_t, std::size_t>;
  std::vector<Cost> dp((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> Cost& { return dp[i * (m + 1) + j]; };
  auto step = [](Cost c, std::size_t d, std::size_t indel) { return Cost{c.first + d, c.second + indel}; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = {i, i};
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = {j, j};
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      at(i, j) = std::min({step(at(i - 1, j - 1), a[i - 1] == b[j - 1] ? 0 : 1, 0), step(at(i - 1, j), 1, 1),
                           step(at(i, j - 1), 1, 1)});
    }
  }

  EditStats stats;
  stats.n_t = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = a[i - 1] == b[j - 1];
      if (at(i, j) == step(at(i - 1, j - 1), same ? 0 : 1, 0)) {
        if (!same) ++stats.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == step(at(i - 1, j), 1, 1)) {
      ++stats.deletions;
      --i;
    } else {
      ++stats.insertions;
      --j;
    }
  }
  return stats;
}

struct Rates {
  double cr = 0.0;
  double ar = 0.0;
};

/// CR = (N_t - D_e - S_e) / N_t and AR = (N_t - D_e - S_e - I_e) / N_t.
/// AR is not clamped and goes negative when insertions dominate.
inline Rates cr_ar(const EditStats& s) {
  if (s.n_t == 0) throw Error(ErrorKind::undefined_metric, "CR/AR undefined for empty ground truth");
  const double n = static_cast<double>(s.n_t);
  const double correct = n - static_cast<double>(s.deletions + s.substitutions);
  return {correct / n, (correct - static_cast<double>(s.insertions)) / n};
}

inline double cer(const EditStats& s) {
  if (s.n_t == 0) throw Error(ErrorKind::undefined_metric, "CER undefined for empty ground truth");
  return static_cast<double>(s.distance()) / static_cast<double>(s.n_t);
}

template <class Seq>
double cer(const Seq& truth, const Seq& pred) {
  return cer(edit_ops(truth, pred));
}

}  // namespace airwrite
