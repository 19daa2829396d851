// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

#include "ips/core.hpp"

#include <cmath>
#include <fmt/core.h>
#include <limits>
#include <numbers>
#include <set>

namespace ips {

namespace {

template <typename E>
std::string enum_name(E value) {
  return nlohmann::json(value).template get<std::string>();
}

template <typename E>
E parse_enum(const std::string& name, const char* what) {
  E value{};
  const nlohmann::json j = name;
  value = j.template get<E>();
  // The serializer maps unknown strings to the first enumerator.
  if (enum_name(value) != name) {
    throw ArgumentError(fmt::format("unknown {} '{}'", what, name));
  }
  return value;
}

void check_unit(const char* field, double v) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw RangeError(field, fmt::format("{} not in [0, 1]", v));
  }
}

void check_open_unit(const char* field, double v) {
  if (!(v > 0.0 && v <= 1.0)) {
    throw RangeError(field, fmt::format("{} not in (0, 1]", v));
  }
}

void check_count(const char* field, long long v, long long lo, long long hi) {
  if (v < lo || v > hi) {
    throw RangeError(field, fmt::format("{} not in [{}, {}]", v, lo, hi));
  }
}

}  // namespace

std::string to_string(Strategy s) { return enum_name(s); }
std::string to_string(PenaltyForm p) { return enum_name(p); }
std::string to_string(BootstrapStrategy b) { return enum_name(b); }
std::string to_string(StopReason r) { return r == StopReason::eou ? "eou" : "max_len"; }

Strategy parse_strategy(const std::string& name) { return parse_enum<Strategy>(name, "strategy"); }
PenaltyForm parse_penalty_form(const std::string& name) {
  return parse_enum<PenaltyForm>(name, "penalty form");
}
BootstrapStrategy parse_bootstrap_strategy(const std::string& name) {
  return parse_enum<BootstrapStrategy>(name, "bootstrap strategy");
}

StrategyConfig validate_config(const StrategyConfig& cfg, int vocab_size) {
  if (vocab_size < 2) {
    throw RangeError("vocab_size", fmt::format("{} < 2", vocab_size));
  }
  const long long v = vocab_size;
  constexpr long long kUnbounded = std::numeric_limits<int>::max();
  check_unit("alpha", cfg.alpha);
  check_unit("beta", cfg.beta);
  // Candidate counts are bounded by V only where the strategy draws on them.
  const bool ips = cfg.strategy == Strategy::ips;
  const bool topk_bootstrap =
      ips && cfg.bootstrap_n > 0 && cfg.bootstrap_strategy == BootstrapStrategy::topk;
  check_count("m", cfg.m, 1, ips ? v : kUnbounded);
  check_count("bootstrap_n", cfg.bootstrap_n, 0, kUnbounded);
  check_count("bootstrap_k", cfg.bootstrap_k, 1, topk_bootstrap ? v : kUnbounded);
  check_open_unit("bootstrap_p", cfg.bootstrap_p);
  check_count("top_k", cfg.top_k, 1, cfg.strategy == Strategy::topk ? v : kUnbounded);
  check_open_unit("top_p", cfg.top_p);
  check_count("contrastive_k", cfg.contrastive_k, 1,
              cfg.strategy == Strategy::contrastive ? v : kUnbounded);
  check_unit("contrastive_alpha", cfg.contrastive_alpha);
  check_count("beam_width", cfg.beam_width, 1, kUnbounded);
  check_count("max_new_tokens", cfg.max_new_tokens, 1, kUnbounded);
  return cfg;
}

void to_json(nlohmann::json& j, const StrategyConfig& cfg) {
  j = nlohmann::json{
      {"strategy", cfg.strategy},
      {"alpha", cfg.alpha},
      {"beta", cfg.beta},
      {"penalty_form", cfg.penalty_form},
      {"m", cfg.m},
      {"strict_isotropy", cfg.strict_isotropy},
      {"bootstrap_n", cfg.bootstrap_n},
      {"bootstrap_strategy", cfg.bootstrap_strategy},
      {"bootstrap_k", cfg.bootstrap_k},
      {"bootstrap_p", cfg.bootstrap_p},
      {"top_k", cfg.top_k},
      {"top_p", cfg.top_p},
      {"contrastive_k", cfg.contrastive_k},
      {"contrastive_alpha", cfg.contrastive_alpha},
      {"beam_width", cfg.beam_width},
      {"max_new_tokens", cfg.max_new_tokens},
      {"seed", cfg.seed},
  };
}

void from_json(const nlohmann::json& j, StrategyConfig& cfg) {
  if (!j.is_object()) {
    throw ArgumentError("strategy config must be a JSON object");
  }
  static const std::set<std::string> known = {
      "strategy",    "alpha",          "beta",        "penalty_form", "m",
      "strict_isotropy", "bootstrap_n", "bootstrap_strategy", "bootstrap_k", "bootstrap_p",
      "top_k",       "top_p",          "contrastive_k", "contrastive_alpha", "beam_width",
      "max_new_tokens", "seed"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) {
      throw ArgumentError(fmt::format("unknown config key '{}'", key));
    }
  }
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) {
      j.at(key).get_to(field);
    }
  };
  auto read_enum = [&](const char* key, auto& field, auto parse) {
    if (j.contains(key)) {
      field = parse(j.at(key).get<std::string>());
    }
  };
  read_enum("strategy", cfg.strategy, parse_strategy);
  read("alpha", cfg.alpha);
  read("beta", cfg.beta);
  read_enum("penalty_form", cfg.penalty_form, parse_penalty_form);
  read("m", cfg.m);
  read("strict_isotropy", cfg.strict_isotropy);
  read("bootstrap_n", cfg.bootstrap_n);
  read_enum("bootstrap_strategy", cfg.bootstrap_strategy, parse_bootstrap_strategy);
  read("bootstrap_k", cfg.bootstrap_k);
  read("bootstrap_p", cfg.bootstrap_p);
  read("top_k", cfg.top_k);
  read("top_p", cfg.top_p);
  read("contrastive_k", cfg.contrastive_k);
  read("contrastive_alpha", cfg.contrastive_alpha);
  read("beam_width", cfg.beam_width);
  read("max_new_tokens", cfg.max_new_tokens);
  read("seed", cfg.seed);
}

GenerationState::GenerationState(HiddenList utterance_reps)
    : utterance_reps_(std::move(utterance_reps)) {}

void GenerationState::append(TokenId token, HiddenVector hidden) {
  if (!generated_hiddens_.empty() && hidden.size() != generated_hiddens_.front().size()) {
    throw DimensionError(fmt::format("hidden size {} != {}", hidden.size(),
                                     generated_hiddens_.front().size()));
  }
  generated_.push_back(token);
  if (generated_hiddens_.empty()) {
    response_rep_ = hidden;
  } else {
    const double count = static_cast<double>(generated_.size());
    response_rep_ += (hidden - response_rep_) / count;
  }
  generated_hiddens_.push_back(std::move(hidden));
}

double Rng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace ips
