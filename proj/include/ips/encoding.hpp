// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <unordered_map>

#include "ips/backend.hpp"

namespace ips {

/// Context serialized as u_1 EOU u_2 EOU ... u_N EOU.
struct EncodedContext {
  TokenSequence tokens;
  std::vector<std::size_t> eou_positions;
  std::size_t n_utterances = 0;
};

/// Throws ArgumentError on an empty context, an empty utterance, or an
/// utterance that already contains `eou`.
EncodedContext encode_context(const DialogueContext& ctx, TokenId eou);

/// Final-layer state at each EOU position, one per utterance.
HiddenList utterance_representations(const EncodedContext& enc, const Backend& backend);

/// Final-layer states of `tokens` at the given positions, from one forward pass.
HiddenList position_hiddens(const Backend& backend, std::span<const TokenId> tokens,
                            std::span<const std::size_t> positions);

/// Trivial tokenizer: integer passthrough or whitespace words with an UNK id.
class Tokenizer {
 public:
  enum class Mode { passthrough, whitespace };

  static Tokenizer passthrough();
  static Tokenizer whitespace(std::unordered_map<std::string, TokenId> vocab, TokenId unk_id);
  /// Loads a JSON object {"word": id, ...}. `unk` names the unknown-word entry.
  static Tokenizer load_vocab(const std::string& path, const std::string& unk = "<unk>");

  Mode mode() const noexcept { return mode_; }

  /// Whitespace mode only.
  TokenSequence encode(const std::string& text) const;
  /// Whitespace mode joins words with single spaces; passthrough prints ids.
  std::string decode(std::span<const TokenId> tokens) const;
  std::string label(TokenId token) const;

 private:
  Mode mode_ = Mode::passthrough;
  std::unordered_map<std::string, TokenId> vocab_;
  std::unordered_map<TokenId, std::string> inverse_;
  TokenId unk_id_ = 0;
};

}  // namespace ips
