// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ips/backend.hpp"
#include "ips/encoding.hpp"

namespace ips {

// ---------------------------------------------------------------------------
// Distribution rules. Every ordering is by descending probability with ties
// going to the lower token id.

/// The `count` most probable ids, most probable first.
TokenSequence top_ids(const ProbVector& probs, int count);

/// Smallest descending-probability prefix whose mass reaches `p`.
TokenSequence nucleus_set(const ProbVector& probs, double p);

/// Draws one id from `support` with weights proportional to probs[id].
TokenId sample_from(const ProbVector& probs, std::span<const TokenId> support, Rng& rng);

TokenId greedy_step(const ProbVector& probs);
/// Throws RangeError unless 1 <= k <= V.
TokenId topk_step(const ProbVector& probs, int k, Rng& rng);
/// Throws RangeError unless 0 < p <= 1.
TokenId nucleus_step(const ProbVector& probs, double p, Rng& rng);

// ---------------------------------------------------------------------------
// Model-scored steps

/// A selected token together with its final-layer state.
struct StepChoice {
  StepRecord record;
  HiddenVector hidden;
};

/// Contrastive search over the top-k candidates:
/// (1 - alpha_cs) * prob - alpha_cs * max cosine to any context or response token.
StepChoice contrastive_step(const Backend& backend, const GenerationState& state,
                            const EncodedContext& enc, int k, double alpha_cs);

/// One isotropic and proximal search step over the top-m candidates.
/// Requires state.step() >= cfg.bootstrap_n and cached utterance representations.
StepChoice ips_step(const Backend& backend, const GenerationState& state,
                    const EncodedContext& enc, const StrategyConfig& cfg);

/// Beam search over summed log probabilities. Beams ending in EOU are frozen;
/// the best of the frozen beams and the beams alive at the length cap wins,
/// ties going to the lexicographically smallest sequence.
GenerationResult beam_search(const Backend& backend, const EncodedContext& enc, int width,
                             int max_new_tokens);

/// Runs the configured strategy until the first EOU or max_new_tokens.
GenerationResult generate(const Backend& backend, const DialogueContext& ctx,
                          const StrategyConfig& cfg);

}  // namespace ips
