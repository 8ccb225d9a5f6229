#pragma once

// Connectionist temporal classification over per-frame log posteriors.
// Symbol 0 is the blank; labels use 1..V-1.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "airwrite/error.hpp"
#include "airwrite/tensor/ops.hpp"

namespace airwrite {

using LabelSequence = std::vector<std::size_t>;

inline constexpr std::size_t ctc_blank = 0;

namespace detail {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == neg_inf) return b;
  if (b == neg_inf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

inline void check_target(const LabelSequence& target, std::size_t V) {
  for (std::size_t s : target) {
    if (s == ctc_blank || s >= V) {
      throw Error(ErrorKind::invalid_shape, "target symbol " + std::to_string(s) +
                                                " outside 1.." + std::to_string(V - 1));
    }
  }
}

}  // namespace detail

/// Frames needed to emit `target`: one per symbol plus a separating blank
/// between equal neighbours.
inline std::size_t ctc_min_frames(const LabelSequence& target) {
  std::size_t n = target.size();
  for (std::size_t i = 1; i < target.size(); ++i) n += target[i] == target[i - 1] ? 1 : 0;
  return n;
}

struct CtcLattice {
  std::vector<std::size_t> extended;  // blank-interleaved target
  std::vector<double> alpha;          // [T x S], includes emission at t
  std::vector<double> beta;           // [T x S], excludes emission at t
  double log_prob = 0.0;
};

/// Forward-backward over the blank-interleaved label sequence in log space.
/// log_probs is row-major [T x V].
inline CtcLattice ctc_lattice(std::span<const double> log_probs, std::size_t T, std::size_t V,
                              const LabelSequence& target) {
  detail::check_target(target, V);
  if (ctc_min_frames(target) > T) {
    throw Error(ErrorKind::infeasible_target, "target needs " + std::to_string(ctc_min_frames(target)) +
                                                  " frames, have " + std::to_string(T));
  }
  CtcLattice lat;
  lat.extended.push_back(ctc_blank);
  for (std::size_t s : target) {
    lat.extended.push_back(s);
    lat.extended.push_back(ctc_blank);
  }
  const auto& ext = lat.extended;
  const std::size_t S = ext.size();
  auto y = [&](std::size_t t, std::size_t s) { return log_probs[t * V + ext[s]]; };
  auto can_skip = [&](std::size_t s) {  // transition s-2 -> s
    return s >= 2 && ext[s] != ctc_blank && ext[s] != ext[s - 2];
  };

  lat.alpha.assign(T * S, detail::neg_inf);
  lat.alpha[0] = y(0, 0);
  if (S > 1) lat.alpha[1] = y(0, 1);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      double acc = lat.alpha[(t - 1) * S + s];
      if (s >= 1) acc = detail::log_add(acc, lat.alpha[(t - 1) * S + s - 1]);
      if (can_skip(s)) acc = detail::log_add(acc, lat.alpha[(t - 1) * S + s - 2]);
      lat.alpha[t * S + s] = acc == detail::neg_inf ? acc : acc + y(t, s);
    }
  }

  lat.beta.assign(T * S, detail::neg_inf);
  lat.beta[(T - 1) * S + S - 1] = 0.0;
  if (S > 1) lat.beta[(T - 1) * S + S - 2] = 0.0;
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t s = 0; s < S; ++s) {
      double acc = lat.beta[(t + 1) * S + s] + y(t + 1, s);
      if (s + 1 < S) acc = detail::log_add(acc, lat.beta[(t + 1) * S + s + 1] + y(t + 1, s + 1));
      if (s + 2 < S && can_skip(s + 2)) {
        acc = detail::log_add(acc, lat.beta[(t + 1) * S + s + 2] + y(t + 1, s + 2));
      }
      lat.beta[t * S + s] = std::isnan(acc) ? detail::neg_inf : acc;
    }
  }

  lat.log_prob = lat.alpha[(T - 1) * S + S - 1];
  if (S > 1) lat.log_prob = detail::log_add(lat.log_prob, lat.alpha[(T - 1) * S + S - 2]);
  return lat;
}

/// -log P(target | posteriors) summed over all alignments. `log_probs` is a
/// [T x V] value of per-frame log posteriors (blank at column 0). The
/// gradient flows into log_probs; an unreachable target yields +inf with a
/// zero gradient.
inline Value ctc_loss(const Value& log_probs, const LabelSequence& target) {
  if (log_probs.rank() != 2) throw Error(ErrorKind::invalid_shape, "ctc_loss expects [T x V]");
  const std::size_t T = log_probs.dim(0);
  const std::size_t V = log_probs.dim(1);
  if (T == 0) throw Error(ErrorKind::empty_input, "ctc_loss over zero frames");
  CtcLattice lat = ctc_lattice(log_probs.data(), T, V, target);
  const double loss = -lat.log_prob;
  return Value::from_op({1}, {loss}, {log_probs},
                        [T, V, lat = std::move(lat)](const detail::Node& nd) {
                          double* g = detail::parent_grad(nd, 0);
                          if (!g || lat.log_prob == detail::neg_inf) return;
                          const std::size_t S = lat.extended.size();
                          const double upstream = nd.grad[0];
                          for (std::size_t t = 0; t < T; ++t)
                            for (std::size_t s = 0; s < S; ++s) {
                              const double occ = lat.alpha[t * S + s] + lat.beta[t * S + s];
                              if (occ == detail::neg_inf) continue;
                              g[t * V + lat.extended[s]] -= upstream * std::exp(occ - lat.log_prob);
                            }
                        });
}

/// Reference probability by enumerating all V^T frame paths.
inline double ctc_brute_force(std::span<const double> log_probs, std::size_t T, std::size_t V,
                              const LabelSequence& target) {
  if (T > 8 || V > 4) throw Error(ErrorKind::oracle_too_large, "brute force limited to T <= 8, V <= 4");
  std::size_t paths = 1;
  for (std::size_t t = 0; t < T; ++t) paths *= V;
  double total = 0.0;
  std::vector<std::size_t> path(T);
  for (std::size_t code = 0; code < paths; ++code) {
    std::size_t rest = code;
    for (std::size_t t = 0; t < T; ++t) {
      path[t] = rest % V;
      rest /= V;
    }
    LabelSequence collapsed;
    for (std::size_t t = 0; t < T; ++t) {
      if (path[t] != ctc_blank && (t == 0 || path[t] != path[t - 1])) collapsed.push_back(path[t]);
    }
    if (collapsed != target) continue;
    double logp = 0.0;
    for (std::size_t t = 0; t < T; ++t) logp += log_probs[t * V + path[t]];
    total += std::exp(logp);
  }
  return total;
}

/// Best-path decoding: per-frame argmax (ties to the lower index), collapse
/// repeats, drop blanks.
inline LabelSequence ctc_greedy_decode(std::span<const double> log_probs, std::size_t T, std::size_t V) {
  LabelSequence out;
  std::size_t prev = ctc_blank;
  for (std::size_t t = 0; t < T; ++t) {
    std::size_t best = 0;
    for (std::size_t v = 1; v < V; ++v) {
      if (log_probs[t * V + v] > log_probs[t * V + best]) best = v;
    }
    if (best != ctc_blank && best != prev) out.push_back(best);
    prev = best;
  }
  return out;
}

inline LabelSequence ctc_greedy_decode(const Value& log_probs) {
  if (log_probs.rank() != 2) throw Error(ErrorKind::invalid_shape, "ctc_greedy_decode expects [T x V]");
  return ctc_greedy_decode(log_probs.data(), log_probs.dim(0), log_probs.dim(1));
}

}  // namespace airwrite
