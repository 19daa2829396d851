// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <fmt/core.h>
#include <numeric>

#include "ips/strategies.hpp"

namespace ips {

namespace {

TokenSequence ranked_ids(const ProbVector& probs) {
  TokenSequence ids(static_cast<std::size_t>(probs.size()));
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](TokenId a, TokenId b) { return probs[a] > probs[b]; });
  return ids;
}

}  // namespace

TokenSequence top_ids(const ProbVector& probs, int count) {
  if (count < 1 || count > probs.size()) {
    throw RangeError("k", fmt::format("{} not in [1, {}]", count, probs.size()));
  }
  TokenSequence ids(static_cast<std::size_t>(probs.size()));
  std::iota(ids.begin(), ids.end(), 0);
  std::partial_sort(ids.begin(), ids.begin() + count, ids.end(), [&](TokenId a, TokenId b) {
    return probs[a] > probs[b] || (probs[a] == probs[b] && a < b);
  });
  ids.resize(static_cast<std::size_t>(count));
  return ids;
}

TokenSequence nucleus_set(const ProbVector& probs, double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw RangeError("p", fmt::format("{} not in (0, 1]", p));
  }
  TokenSequence ids = ranked_ids(probs);
  double mass = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    mass += probs[ids[i]];
    if (mass >= p) {
      ids.resize(i + 1);
      return ids;
    }
  }
  // Rounding can leave the total just below p = 1; keep everything then.
  return ids;
}

TokenId sample_from(const ProbVector& probs, std::span<const TokenId> support, Rng& rng) {
  if (support.empty()) {
    throw ArgumentError("sampling from an empty support");
  }
  double total = 0.0;
  for (TokenId id : support) {
    total += probs[id];
  }
  const double target = rng.uniform() * total;
  double cumulative = 0.0;
  TokenId last_positive = support.front();
  for (TokenId id : support) {
    cumulative += probs[id];
    if (probs[id] > 0.0) {
      last_positive = id;
    }
    if (cumulative > target) {
      return id;
    }
  }
  return last_positive;
}

TokenId greedy_step(const ProbVector& probs) {
  Eigen::Index best = 0;
  // maxCoeff returns the first maximum, i.e. the lowest id on ties.
  probs.maxCoeff(&best);
  return static_cast<TokenId>(best);
}

TokenId topk_step(const ProbVector& probs, int k, Rng& rng) {
  const TokenSequence support = top_ids(probs, k);
  return sample_from(probs, support, rng);
}

TokenId nucleus_step(const ProbVector& probs, double p, Rng& rng) {
  const TokenSequence support = nucleus_set(probs, p);
  return sample_from(probs, support, rng);
}

}  // namespace ips
