// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ips {

using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Final-layer state of one position, length = backend hidden dimension.
using HiddenVector = Vector<double>;
using HiddenList = std::vector<HiddenVector>;

/// Probability distribution over the vocabulary.
using ProbVector = Vector<double>;

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration value is outside its legal range. field() names it.
class RangeError : public Error {
 public:
  RangeError(std::string field, const std::string& detail)
      : Error("value out of range for '" + field + "': " + detail), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class ArgumentError : public Error {
  using Error::Error;
};
class VocabError : public Error {
  using Error::Error;
};
class DimensionError : public Error {
  using Error::Error;
};
class DegenerateVector : public Error {
  using Error::Error;
};
class MissingEntry : public Error {
  using Error::Error;
};
class ValidationError : public Error {
  using Error::Error;
};
class ProtocolError : public Error {
  using Error::Error;
};
class TimeoutError : public Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Configuration

enum class Strategy { greedy, beam, topk, nucleus, contrastive, ips };
enum class PenaltyForm { eq5, beta };
enum class BootstrapStrategy { topk, nucleus, greedy };

NLOHMANN_JSON_SERIALIZE_ENUM(Strategy, {{Strategy::greedy, "greedy"},
                                        {Strategy::beam, "beam"},
                                        {Strategy::topk, "topk"},
                                        {Strategy::nucleus, "nucleus"},
                                        {Strategy::contrastive, "contrastive"},
                                        {Strategy::ips, "ips"}})
NLOHMANN_JSON_SERIALIZE_ENUM(PenaltyForm, {{PenaltyForm::eq5, "eq5"}, {PenaltyForm::beta, "beta"}})
NLOHMANN_JSON_SERIALIZE_ENUM(BootstrapStrategy, {{BootstrapStrategy::topk, "topk"},
                                                 {BootstrapStrategy::nucleus, "nucleus"},
                                                 {BootstrapStrategy::greedy, "greedy"}})

std::string to_string(Strategy s);
std::string to_string(PenaltyForm p);
std::string to_string(BootstrapStrategy b);
Strategy parse_strategy(const std::string& name);
PenaltyForm parse_penalty_form(const std::string& name);
BootstrapStrategy parse_bootstrap_strategy(const std::string& name);

struct StrategyConfig {
  Strategy strategy = Strategy::ips;

  // IPS selection: alpha * prob + (1 - alpha) * penalty.
  double alpha = 0.6;
  double beta = 0.5;
  PenaltyForm penalty_form = PenaltyForm::eq5;
  int m = 6;
  // Score i_value against the already generated tokens only, without the candidate.
  bool strict_isotropy = false;

  // Bootstrap phase of IPS.
  int bootstrap_n = 2;
  BootstrapStrategy bootstrap_strategy = BootstrapStrategy::topk;
  int bootstrap_k = 7;
  double bootstrap_p = 0.9;

  // Baselines.
  int top_k = 7;
  double top_p = 0.9;
  int contrastive_k = 5;
  double contrastive_alpha = 0.6;
  int beam_width = 4;

  int max_new_tokens = 64;
  std::uint64_t seed = 0;

  bool operator==(const StrategyConfig&) const = default;
};

/// Checks every range constraint of `cfg` against a vocabulary of `vocab_size`
/// and returns it unchanged. Throws RangeError naming the first bad field.
/// The upper bound V applies to m, bootstrap_k, top_k and contrastive_k only
/// when the configured strategy uses that field.
StrategyConfig validate_config(const StrategyConfig& cfg, int vocab_size);

void to_json(nlohmann::json& j, const StrategyConfig& cfg);
/// Fields absent from `j` keep their current value; unknown keys are rejected.
void from_json(const nlohmann::json& j, StrategyConfig& cfg);

// ---------------------------------------------------------------------------
// Dialogue and generation data

struct DialogueContext {
  std::vector<TokenSequence> utterances;
};

/// Running decode state. The response representation is the mean of the
/// generated token hiddens, maintained incrementally on every append.
class GenerationState {
 public:
  explicit GenerationState(HiddenList utterance_reps = {});

  void append(TokenId token, HiddenVector hidden);

  int step() const noexcept { return static_cast<int>(generated_.size()); }
  const TokenSequence& generated() const noexcept { return generated_; }
  const HiddenList& generated_hiddens() const noexcept { return generated_hiddens_; }
  const HiddenList& utterance_reps() const noexcept { return utterance_reps_; }
  /// Undefined (empty vector) until the first append.
  const HiddenVector& response_rep() const noexcept { return response_rep_; }

 private:
  TokenSequence generated_;
  HiddenList generated_hiddens_;
  HiddenVector response_rep_;
  HiddenList utterance_reps_;
};

struct CandidateScore {
  TokenId token = 0;
  double prob = 0.0;
  double p_value = 0.0;
  double i_value = 0.0;
  // Contrastive baseline only.
  double penalty = 0.0;
  double score = 0.0;
};

struct StepRecord {
  TokenId token = 0;
  double prob = 0.0;
  std::optional<double> p_value;
  std::optional<double> i_value;
  // Contrastive baseline only: max cosine against the prefix.
  std::optional<double> penalty;
  double score = 0.0;
  bool bootstrap = false;
  std::vector<CandidateScore> candidates;
};

enum class StopReason { eou, max_len };
std::string to_string(StopReason r);

struct GenerationResult {
  TokenSequence tokens;
  std::optional<std::string> text;
  std::vector<StepRecord> per_step;
  StopReason stop_reason = StopReason::max_len;
  double elapsed_s = 0.0;
};

// ---------------------------------------------------------------------------
// Random numbers

/// Seeded generator with a platform-independent draw sequence.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Uniform doubles take the top 53 bits of one draw; normals use
/// Box-Muller over two uniforms. No std distributions are involved since
/// their algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace ips
