// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fmt/core.h>

#include "ips/scoring.hpp"
#include "ips/strategies.hpp"

namespace ips {

namespace {

TokenSequence full_prefix(const EncodedContext& enc, const TokenSequence& generated) {
  TokenSequence prefix = enc.tokens;
  prefix.insert(prefix.end(), generated.begin(), generated.end());
  return prefix;
}

/// Index of the best candidate; equal scores go to the lower token id.
std::size_t argmax_candidate(const std::vector<CandidateScore>& candidates) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    const auto& b = candidates[best];
    if (c.score > b.score || (c.score == b.score && c.token < b.token)) {
      best = i;
    }
  }
  return best;
}

StepRecord plain_record(const ProbVector& probs, TokenId token, bool bootstrap = false) {
  StepRecord r;
  r.token = token;
  r.prob = probs[token];
  r.score = r.prob;
  r.bootstrap = bootstrap;
  return r;
}

}  // namespace

StepChoice contrastive_step(const Backend& backend, const GenerationState& state,
                            const EncodedContext& enc, int k, double alpha_cs) {
  const TokenSequence prefix = full_prefix(enc, state.generated());
  const StepOutput out = backend.forward(prefix, true);
  const TokenSequence ids = top_ids(out.probs, k);
  HiddenList hiddens = backend.forward_candidates(prefix, ids);
  const std::span<const HiddenVector> history(*out.hidden_all);

  std::vector<CandidateScore> candidates;
  candidates.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    CandidateScore c;
    c.token = ids[i];
    c.prob = out.probs[ids[i]];
    c.penalty = degeneration_penalty(hiddens[i], history);
    c.score = contrastive_score(c.prob, c.penalty, alpha_cs);
    candidates.push_back(c);
  }
  const std::size_t best = argmax_candidate(candidates);

  StepChoice choice;
  choice.record.token = candidates[best].token;
  choice.record.prob = candidates[best].prob;
  choice.record.penalty = candidates[best].penalty;
  choice.record.score = candidates[best].score;
  choice.record.candidates = std::move(candidates);
  choice.hidden = std::move(hiddens[best]);
  return choice;
}

StepChoice ips_step(const Backend& backend, const GenerationState& state,
                    const EncodedContext& enc, const StrategyConfig& cfg) {
  if (state.step() < cfg.bootstrap_n) {
    throw ArgumentError(fmt::format("IPS step at {} before the {} bootstrap steps finished",
                                    state.step(), cfg.bootstrap_n));
  }
  if (state.utterance_reps().empty()) {
    throw ArgumentError("IPS step without utterance representations");
  }
  const TokenSequence prefix = full_prefix(enc, state.generated());
  const StepOutput out = backend.forward(prefix, false);
  const TokenSequence ids = top_ids(out.probs, cfg.m);
  HiddenList hiddens = backend.forward_candidates(prefix, ids);

  const std::span<const HiddenVector> generated(state.generated_hiddens());
  const std::span<const HiddenVector> utterances(state.utterance_reps());
  const double count = static_cast<double>(state.step());

  std::optional<double> strict_i;
  if (cfg.strict_isotropy && state.step() > 0) {
    strict_i = isotropic_value(state.response_rep(), utterances);
  }

  std::vector<CandidateScore> candidates;
  candidates.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const HiddenVector& h = hiddens[i];
    CandidateScore c;
    c.token = ids[i];
    c.prob = out.probs[ids[i]];
    c.p_value = proximal_value(h, generated);
    if (cfg.strict_isotropy) {
      c.i_value = strict_i.value_or(0.0);
    } else if (state.step() == 0) {
      c.i_value = isotropic_value(h, utterances);
    } else {
      // Running mean with the candidate folded in.
      const HiddenVector rep = state.response_rep() + (h - state.response_rep()) / (count + 1.0);
      c.i_value = isotropic_value(rep, utterances);
    }
    c.score = ips_score(c.prob, c.p_value, c.i_value, cfg);
    candidates.push_back(c);
  }
  const std::size_t best = argmax_candidate(candidates);

  StepChoice choice;
  choice.record.token = candidates[best].token;
  choice.record.prob = candidates[best].prob;
  choice.record.p_value = candidates[best].p_value;
  choice.record.i_value = candidates[best].i_value;
  choice.record.score = candidates[best].score;
  choice.record.candidates = std::move(candidates);
  choice.hidden = std::move(hiddens[best]);
  return choice;
}

// ---------------------------------------------------------------------------

namespace {

struct Hypothesis {
  TokenSequence tokens;
  std::vector<double> probs;
  std::vector<double> cumulative;
  double log_prob = 0.0;
};

bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_prob != b.log_prob) {
    return a.log_prob > b.log_prob;
  }
  return a.tokens < b.tokens;
}

GenerationResult to_result(const Hypothesis& h, TokenId eou) {
  GenerationResult r;
  r.tokens = h.tokens;
  for (std::size_t i = 0; i < h.tokens.size(); ++i) {
    StepRecord rec;
    rec.token = h.tokens[i];
    rec.prob = h.probs[i];
    rec.score = h.cumulative[i];
    r.per_step.push_back(std::move(rec));
  }
  r.stop_reason =
      (!h.tokens.empty() && h.tokens.back() == eou) ? StopReason::eou : StopReason::max_len;
  return r;
}

}  // namespace

GenerationResult beam_search(const Backend& backend, const EncodedContext& enc, int width,
                             int max_new_tokens) {
  if (width < 1) {
    throw RangeError("beam_width", fmt::format("{} < 1", width));
  }
  if (max_new_tokens < 1) {
    throw RangeError("max_new_tokens", fmt::format("{} < 1", max_new_tokens));
  }
  const TokenId eou = backend.info().eou_token_id;
  const int vocab = backend.info().vocab_size;

  std::vector<Hypothesis> live(1);
  std::vector<Hypothesis> finished;
  for (int step = 0; step < max_new_tokens && !live.empty(); ++step) {
    std::vector<Hypothesis> expansions;
    expansions.reserve(live.size() * static_cast<std::size_t>(vocab));
    for (const auto& hyp : live) {
      const StepOutput out = backend.forward(full_prefix(enc, hyp.tokens), false);
      for (TokenId v = 0; v < vocab; ++v) {
        Hypothesis next = hyp;
        next.tokens.push_back(v);
        next.probs.push_back(out.probs[v]);
        next.log_prob = hyp.log_prob + std::log(out.probs[v]);
        next.cumulative.push_back(next.log_prob);
        expansions.push_back(std::move(next));
      }
    }
    const auto keep = std::min<std::size_t>(expansions.size(), static_cast<std::size_t>(width));
    std::partial_sort(expansions.begin(), expansions.begin() + keep, expansions.end(), better);
    expansions.resize(keep);

    live.clear();
    for (auto& hyp : expansions) {
      (hyp.tokens.back() == eou ? finished : live).push_back(std::move(hyp));
    }
  }

  finished.insert(finished.end(), std::make_move_iterator(live.begin()),
                  std::make_move_iterator(live.end()));
  const auto best = std::min_element(finished.begin(), finished.end(), better);
  return to_result(*best, eou);
}

// ---------------------------------------------------------------------------

GenerationResult generate(const Backend& backend, const DialogueContext& ctx,
                          const StrategyConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const BackendInfo& info = backend.info();
  validate_config(cfg, info.vocab_size);
  const EncodedContext enc = encode_context(ctx, info.eou_token_id);

  GenerationResult result;
  if (cfg.strategy == Strategy::beam) {
    result = beam_search(backend, enc, cfg.beam_width, cfg.max_new_tokens);
  } else {
    HiddenList reps;
    if (cfg.strategy == Strategy::ips) {
      reps = utterance_representations(enc, backend);
    }
    GenerationState state(std::move(reps));
    Rng rng(cfg.seed);
    // Hidden states are only tracked by the strategies that score with them.
    const bool track_hidden =
        cfg.strategy == Strategy::ips || cfg.strategy == Strategy::contrastive;

    for (int t = 0; t < cfg.max_new_tokens; ++t) {
      StepChoice choice;
      auto distribution = [&] {
        return backend.forward(full_prefix(enc, state.generated()), false).probs;
      };
      switch (cfg.strategy) {
        case Strategy::greedy: {
          const ProbVector probs = distribution();
          choice.record = plain_record(probs, greedy_step(probs));
          break;
        }
        case Strategy::topk: {
          const ProbVector probs = distribution();
          choice.record = plain_record(probs, topk_step(probs, cfg.top_k, rng));
          break;
        }
        case Strategy::nucleus: {
          const ProbVector probs = distribution();
          choice.record = plain_record(probs, nucleus_step(probs, cfg.top_p, rng));
          break;
        }
        case Strategy::contrastive:
          choice = contrastive_step(backend, state, enc, cfg.contrastive_k, cfg.contrastive_alpha);
          break;
        case Strategy::ips:
          if (state.step() < cfg.bootstrap_n) {
            const ProbVector probs = distribution();
            TokenId token = 0;
            switch (cfg.bootstrap_strategy) {
              case BootstrapStrategy::topk:
                token = topk_step(probs, cfg.bootstrap_k, rng);
                break;
              case BootstrapStrategy::nucleus:
                token = nucleus_step(probs, cfg.bootstrap_p, rng);
                break;
              case BootstrapStrategy::greedy:
                token = greedy_step(probs);
                break;
            }
            choice.record = plain_record(probs, token, true);
            const TokenSequence prefix = full_prefix(enc, state.generated());
            const TokenId single[] = {token};
            choice.hidden = backend.forward_candidates(prefix, single).front();
          } else {
            choice = ips_step(backend, state, enc, cfg);
          }
          break;
        case Strategy::beam:
          break;
      }

      const TokenId token = choice.record.token;
      state.append(token, track_hidden ? std::move(choice.hidden) : HiddenVector());
      result.per_step.push_back(std::move(choice.record));
      if (token == info.eou_token_id) {
        result.stop_reason = StopReason::eou;
        break;
      }
    }
    result.tokens = state.generated();
  }

  result.elapsed_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace ips
