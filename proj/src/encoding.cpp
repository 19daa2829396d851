// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

#include "ips/encoding.hpp"

#include <algorithm>
#include <fmt/core.h>
#include <fstream>
#include <sstream>

namespace ips {

EncodedContext encode_context(const DialogueContext& ctx, TokenId eou) {
  if (ctx.utterances.empty()) {
    throw ArgumentError("dialogue context has no utterances");
  }
  EncodedContext enc;
  for (std::size_t i = 0; i < ctx.utterances.size(); ++i) {
    const auto& utt = ctx.utterances[i];
    if (utt.empty()) {
      throw ArgumentError(fmt::format("utterance {} is empty", i));
    }
    if (std::find(utt.begin(), utt.end(), eou) != utt.end()) {
      throw ArgumentError(fmt::format("utterance {} contains the EOU id {}", i, eou));
    }
    enc.tokens.insert(enc.tokens.end(), utt.begin(), utt.end());
    enc.eou_positions.push_back(enc.tokens.size());
    enc.tokens.push_back(eou);
  }
  enc.n_utterances = ctx.utterances.size();
  return enc;
}

HiddenList position_hiddens(const Backend& backend, std::span<const TokenId> tokens,
                            std::span<const std::size_t> positions) {
  const StepOutput out = backend.forward(tokens, true);
  const HiddenList& all = *out.hidden_all;
  HiddenList picked;
  picked.reserve(positions.size());
  for (std::size_t pos : positions) {
    picked.push_back(all.at(pos));
  }
  return picked;
}

HiddenList utterance_representations(const EncodedContext& enc, const Backend& backend) {
  return position_hiddens(backend, enc.tokens, enc.eou_positions);
}

// ---------------------------------------------------------------------------

Tokenizer Tokenizer::passthrough() { return Tokenizer{}; }

Tokenizer Tokenizer::whitespace(std::unordered_map<std::string, TokenId> vocab, TokenId unk_id) {
  Tokenizer t;
  t.mode_ = Mode::whitespace;
  t.unk_id_ = unk_id;
  for (const auto& [word, id] : vocab) {
    // Lowest-sorting word wins when several share an id.
    auto [it, inserted] = t.inverse_.emplace(id, word);
    if (!inserted && word < it->second) {
      it->second = word;
    }
  }
  t.vocab_ = std::move(vocab);
  return t;
}

Tokenizer Tokenizer::load_vocab(const std::string& path, const std::string& unk) {
  std::ifstream in(path);
  if (!in) {
    throw ArgumentError(fmt::format("cannot open vocabulary '{}'", path));
  }
  nlohmann::json j;
  try {
    in >> j;
    auto vocab = j.get<std::unordered_map<std::string, TokenId>>();
    const auto it = vocab.find(unk);
    if (it == vocab.end()) {
      throw ArgumentError(fmt::format("vocabulary '{}' has no '{}' entry", path, unk));
    }
    const TokenId unk_id = it->second;
    return whitespace(std::move(vocab), unk_id);
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(fmt::format("vocabulary '{}' is malformed: {}", path, e.what()));
  }
}

TokenSequence Tokenizer::encode(const std::string& text) const {
  if (mode_ != Mode::whitespace) {
    throw ArgumentError("passthrough tokenizer only accepts integer token lists");
  }
  TokenSequence out;
  std::istringstream words(text);
  std::string word;
  while (words >> word) {
    const auto it = vocab_.find(word);
    out.push_back(it == vocab_.end() ? unk_id_ : it->second);
  }
  return out;
}

std::string Tokenizer::label(TokenId token) const {
  if (mode_ == Mode::whitespace) {
    const auto it = inverse_.find(token);
    if (it != inverse_.end()) {
      return it->second;
    }
  }
  return std::to_string(token);
}

std::string Tokenizer::decode(std::span<const TokenId> tokens) const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) {
      out += ' ';
    }
    out += label(tokens[i]);
  }
  return out;
}

}  // namespace ips
