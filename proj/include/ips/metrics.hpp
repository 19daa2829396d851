// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>

#include "ips/core.hpp"

namespace ips {

/// Corpus-level distinct-n: unique n-grams over total n-grams, pooled across
/// responses. Returns 0 when the corpus has no n-grams.
double distinct_n(const std::vector<TokenSequence>& responses, int n);

/// Copy of `tokens` with every `eou` removed.
TokenSequence strip_token(const TokenSequence& tokens, TokenId eou);

/// L x L cosine matrix of `hiddens`; exactly symmetric.
Matrix<double> similarity_heatmap(const HiddenList& hiddens);

struct StepTrace {
  std::optional<double> p_value;
  std::optional<double> i_value;
  double score = 0.0;
};

struct Diagnostics {
  /// Mean cosine over unordered pairs of response hiddens; 1 for a single token.
  double mean_intra_response_cosine = 1.0;
  /// Mean cosine of the response representation against each utterance representation.
  double mean_context_cosine = 0.0;
  std::vector<StepTrace> per_step_trace;
};

/// `hiddens` are the response token states (one per token scored).
Diagnostics diagnostics(const GenerationResult& result, const HiddenList& hiddens,
                        const HiddenList& utterance_reps);

/// Header row of labels, then one row per label followed by L values with
/// six fractional digits.
void write_heatmap_csv(std::ostream& out, const std::vector<std::string>& labels,
                       const Matrix<double>& matrix);

struct HeatmapCsv {
  std::vector<std::string> labels;
  Matrix<double> matrix;
};

HeatmapCsv read_heatmap_csv(std::istream& in);

}  // namespace ips
