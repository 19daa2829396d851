// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>

#include "ips/core.hpp"

namespace ips {

struct BackendInfo {
  int vocab_size = 0;
  int hidden_dim = 0;
  TokenId eou_token_id = 0;

  /// Throws ValidationError unless V >= 2, d >= 1 and eou < V.
  void validate() const;
  bool operator==(const BackendInfo&) const = default;
};

/// One forward pass: next-token distribution plus final-layer states.
struct StepOutput {
  ProbVector probs;
  HiddenVector hidden_last;
  std::optional<HiddenList> hidden_all;
};

/// Returns a description of the first invariant `out` violates, if any.
/// `prefix_len` is checked against hidden_all when that is present.
std::optional<std::string> check_step_output(const StepOutput& out, const BackendInfo& info,
                                             std::size_t prefix_len);

inline constexpr double kProbSumTolerance = 1e-4;

/// Abstract language model: prefix in, distribution and hidden states out.
///
/// Implementations must be pure functions of the prefix and safe to call from
/// several threads at once.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual const BackendInfo& info() const = 0;

  /// Throws ArgumentError on an empty prefix, VocabError on an id >= V.
  StepOutput forward(std::span<const TokenId> prefix, bool want_all_hidden) const;

  /// Element i is forward(prefix ++ [candidates[i]]).hidden_last.
  HiddenList forward_candidates(std::span<const TokenId> prefix,
                                std::span<const TokenId> candidates) const;

 protected:
  virtual StepOutput do_forward(std::span<const TokenId> prefix, bool want_all_hidden) const = 0;
  /// Default runs one forward per candidate.
  virtual HiddenList do_forward_candidates(std::span<const TokenId> prefix,
                                           std::span<const TokenId> candidates) const;

  void check_tokens(std::span<const TokenId> tokens) const;
};

using BackendPtr = std::shared_ptr<const Backend>;

// ---------------------------------------------------------------------------

/// Table-driven backend: forward is an exact lookup keyed by prefix.
class ScriptedBackend final : public Backend {
 public:
  using Table = std::map<TokenSequence, StepOutput>;

  /// Throws ValidationError when any entry breaks the StepOutput invariants.
  ScriptedBackend(Table table, BackendInfo info);

  static ScriptedBackend from_json(const nlohmann::json& j);
  static ScriptedBackend load(const std::string& path);
  nlohmann::json to_json() const;

  const BackendInfo& info() const override { return info_; }
  const Table& table() const noexcept { return table_; }

 protected:
  StepOutput do_forward(std::span<const TokenId> prefix, bool want_all_hidden) const override;

 private:
  Table table_;
  BackendInfo info_;
};

// ---------------------------------------------------------------------------

struct TinyTransformerConfig {
  std::uint64_t seed = 42;
  int vocab_size = 64;
  int hidden_dim = 16;
  int layers = 2;
  int heads = 2;
  int max_positions = 512;
  TokenId eou_token_id = 2;
};

/// Small causal pre-norm transformer with pseudo-random weights.
///
/// Hidden states are the final layer-norm output; probabilities are the
/// softmax of an untied output projection of those states.
class TinyTransformer final : public Backend {
 public:
  /// Throws ArgumentError when hidden_dim is not divisible by heads.
  explicit TinyTransformer(const TinyTransformerConfig& cfg);
  ~TinyTransformer() override;

  TinyTransformer(const TinyTransformer&) = delete;
  TinyTransformer& operator=(const TinyTransformer&) = delete;

  const BackendInfo& info() const override { return info_; }
  const TinyTransformerConfig& config() const noexcept { return cfg_; }

 protected:
  StepOutput do_forward(std::span<const TokenId> prefix, bool want_all_hidden) const override;
  HiddenList do_forward_candidates(std::span<const TokenId> prefix,
                                   std::span<const TokenId> candidates) const override;

 private:
  struct Weights;
  struct Cache;

  void run_prefix(std::span<const TokenId> prefix, Cache& cache, HiddenList* all) const;
  HiddenVector step(TokenId token, Cache& cache) const;
  ProbVector probabilities(const HiddenVector& hidden) const;

  TinyTransformerConfig cfg_;
  BackendInfo info_;
  std::unique_ptr<const Weights> weights_;
};

// ---------------------------------------------------------------------------

/// Client for the JSON-over-HTTP forward protocol. The endpoint is queried
/// for its BackendInfo on construction.
class RemoteBackend final : public Backend {
 public:
  RemoteBackend(const std::string& endpoint_url, double timeout_s);
  ~RemoteBackend() override;

  const BackendInfo& info() const override { return info_; }

 protected:
  StepOutput do_forward(std::span<const TokenId> prefix, bool want_all_hidden) const override;
  HiddenList do_forward_candidates(std::span<const TokenId> prefix,
                                   std::span<const TokenId> candidates) const override;

 private:
  struct Connection;

  nlohmann::json request(const std::string& method, const std::string& path,
                         const nlohmann::json* body) const;

  std::unique_ptr<Connection> conn_;
  mutable std::mutex mutex_;
  BackendInfo info_;
};

/// Parses "scripted:<path>", "tiny:<seed>,<V>,<d>,<L>,<H>" or "remote:<url>".
BackendPtr make_backend(const std::string& spec, double remote_timeout_s = 30.0);

// Wire-format helpers shared by the remote client and the server.
nlohmann::json info_to_json(const BackendInfo& info);
BackendInfo info_from_json(const nlohmann::json& j);
HiddenVector vector_from_json(const nlohmann::json& j, const char* field);
nlohmann::json vector_to_json(const Vector<double>& v);
/// Numerically stable softmax.
ProbVector softmax(const Vector<double>& logits);

}  // namespace ips
