// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

#include "ips/backend.hpp"

#include <cmath>
#include <fmt/core.h>
#include <fmt/ranges.h>

namespace ips {

void BackendInfo::validate() const {
  if (vocab_size < 2) {
    throw ValidationError(fmt::format("vocab_size {} < 2", vocab_size));
  }
  if (hidden_dim < 1) {
    throw ValidationError(fmt::format("hidden_dim {} < 1", hidden_dim));
  }
  if (eou_token_id < 0 || eou_token_id >= vocab_size) {
    throw ValidationError(fmt::format("eou_token_id {} outside vocabulary", eou_token_id));
  }
}

std::optional<std::string> check_step_output(const StepOutput& out, const BackendInfo& info,
                                             std::size_t prefix_len) {
  if (out.probs.size() != info.vocab_size) {
    return fmt::format("probs has {} entries, expected {}", out.probs.size(), info.vocab_size);
  }
  if (!out.probs.allFinite() || (out.probs.array() < 0.0).any()) {
    return std::string("probs must be finite and non-negative");
  }
  const double total = out.probs.sum();
  if (std::abs(total - 1.0) > kProbSumTolerance) {
    return fmt::format("probs sum to {}, expected 1", total);
  }
  auto check_hidden = [&](const HiddenVector& h, const char* what) -> std::optional<std::string> {
    if (h.size() != info.hidden_dim) {
      return fmt::format("{} has {} components, expected {}", what, h.size(), info.hidden_dim);
    }
    if (!h.allFinite()) {
      return fmt::format("{} has non-finite components", what);
    }
    return std::nullopt;
  };
  if (auto err = check_hidden(out.hidden_last, "hidden_last")) {
    return err;
  }
  if (out.hidden_all) {
    if (out.hidden_all->size() != prefix_len) {
      return fmt::format("hidden_all has {} rows, expected {}", out.hidden_all->size(), prefix_len);
    }
    for (const auto& h : *out.hidden_all) {
      if (auto err = check_hidden(h, "hidden_all")) {
        return err;
      }
    }
  }
  return std::nullopt;
}

void Backend::check_tokens(std::span<const TokenId> tokens) const {
  const int vocab = info().vocab_size;
  for (TokenId t : tokens) {
    if (t < 0 || t >= vocab) {
      throw VocabError(fmt::format("token id {} outside vocabulary of size {}", t, vocab));
    }
  }
}

StepOutput Backend::forward(std::span<const TokenId> prefix, bool want_all_hidden) const {
  if (prefix.empty()) {
    throw ArgumentError("forward on an empty prefix");
  }
  check_tokens(prefix);
  StepOutput out = do_forward(prefix, want_all_hidden);
  if (!want_all_hidden) {
    out.hidden_all.reset();
  }
  return out;
}

HiddenList Backend::forward_candidates(std::span<const TokenId> prefix,
                                       std::span<const TokenId> candidates) const {
  if (prefix.empty()) {
    throw ArgumentError("forward_candidates on an empty prefix");
  }
  if (candidates.empty()) {
    throw ArgumentError("forward_candidates with no candidates");
  }
  check_tokens(prefix);
  check_tokens(candidates);
  return do_forward_candidates(prefix, candidates);
}

HiddenList Backend::do_forward_candidates(std::span<const TokenId> prefix,
                                          std::span<const TokenId> candidates) const {
  HiddenList out;
  out.reserve(candidates.size());
  TokenSequence extended(prefix.begin(), prefix.end());
  extended.push_back(0);
  for (TokenId c : candidates) {
    extended.back() = c;
    out.push_back(do_forward(extended, false).hidden_last);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Wire helpers

nlohmann::json info_to_json(const BackendInfo& info) {
  return {{"vocab_size", info.vocab_size},
          {"hidden_dim", info.hidden_dim},
          {"eou_token_id", info.eou_token_id}};
}

BackendInfo info_from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw ProtocolError("backend info must be a JSON object");
  }
  BackendInfo info;
  try {
    info.vocab_size = j.at("vocab_size").get<int>();
    info.hidden_dim = j.at("hidden_dim").get<int>();
    info.eou_token_id = j.at("eou_token_id").get<TokenId>();
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(fmt::format("bad backend info: {}", e.what()));
  }
  return info;
}

HiddenVector vector_from_json(const nlohmann::json& j, const char* field) {
  if (!j.is_array()) {
    throw ProtocolError(fmt::format("'{}' must be an array of numbers", field));
  }
  HiddenVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      throw ProtocolError(fmt::format("'{}' must be an array of numbers", field));
    }
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

nlohmann::json vector_to_json(const Vector<double>& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

ProbVector softmax(const Vector<double>& logits) {
  const double top = logits.maxCoeff();
  ProbVector p = (logits.array() - top).exp().matrix();
  return p / p.sum();
}

// ---------------------------------------------------------------------------

BackendPtr make_backend(const std::string& spec, double remote_timeout_s) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) {
    throw ArgumentError(fmt::format("backend spec '{}' has no kind prefix", spec));
  }
  const std::string kind = spec.substr(0, colon);
  const std::string rest = spec.substr(colon + 1);
  if (kind == "scripted") {
    return std::make_shared<ScriptedBackend>(ScriptedBackend::load(rest));
  }
  if (kind == "remote") {
    return std::make_shared<RemoteBackend>(rest, remote_timeout_s);
  }
  if (kind == "tiny") {
    std::vector<long long> fields;
    std::size_t pos = 0;
    while (pos <= rest.size()) {
      const auto comma = rest.find(',', pos);
      const std::string item =
          rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      try {
        std::size_t used = 0;
        fields.push_back(std::stoll(item, &used));
        if (used != item.size()) {
          throw std::invalid_argument(item);
        }
      } catch (const std::exception&) {
        throw ArgumentError(fmt::format("bad integer '{}' in backend spec '{}'", item, spec));
      }
      if (comma == std::string::npos) {
        break;
      }
      pos = comma + 1;
    }
    if (fields.size() != 5) {
      throw ArgumentError(
          fmt::format("tiny backend spec needs <seed>,<V>,<d>,<L>,<H>, got '{}'", rest));
    }
    TinyTransformerConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(fields[0]);
    cfg.vocab_size = static_cast<int>(fields[1]);
    cfg.hidden_dim = static_cast<int>(fields[2]);
    cfg.layers = static_cast<int>(fields[3]);
    cfg.heads = static_cast<int>(fields[4]);
    return std::make_shared<TinyTransformer>(cfg);
  }
  throw ArgumentError(fmt::format("unknown backend kind '{}'", kind));
}

}  // namespace ips
