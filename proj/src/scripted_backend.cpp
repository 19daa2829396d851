// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

#include <fmt/core.h>
#include <fmt/ranges.h>

#include <fstream>

#include "ips/backend.hpp"

namespace ips {

ScriptedBackend::ScriptedBackend(Table table, BackendInfo info)
    : table_(std::move(table)), info_(info) {
  info_.validate();
  for (const auto& [prefix, out] : table_) {
    if (prefix.empty()) {
      throw ValidationError("scripted table has an empty prefix");
    }
    for (TokenId t : prefix) {
      if (t < 0 || t >= info_.vocab_size) {
        throw ValidationError(fmt::format("prefix [{}] has out-of-vocabulary id {}",
                                          fmt::join(prefix, ","), t));
      }
    }
    if (auto err = check_step_output(out, info_, prefix.size())) {
      throw ValidationError(fmt::format("entry [{}]: {}", fmt::join(prefix, ","), *err));
    }
  }
}

StepOutput ScriptedBackend::do_forward(std::span<const TokenId> prefix,
                                       bool want_all_hidden) const {
  const auto it = table_.find(TokenSequence(prefix.begin(), prefix.end()));
  if (it == table_.end()) {
    throw MissingEntry(fmt::format("no scripted entry for prefix [{}]", fmt::join(prefix, ",")));
  }
  if (want_all_hidden && !it->second.hidden_all) {
    throw MissingEntry(
        fmt::format("scripted entry [{}] has no hidden_all", fmt::join(prefix, ",")));
  }
  return it->second;
}

ScriptedBackend ScriptedBackend::from_json(const nlohmann::json& j) {
  BackendInfo info;
  Table table;
  try {
    info.vocab_size = j.at("vocab_size").get<int>();
    info.hidden_dim = j.at("hidden_dim").get<int>();
    info.eou_token_id = j.at("eou_token_id").get<TokenId>();
    for (const auto& entry : j.at("entries")) {
      auto prefix = entry.at("prefix").get<TokenSequence>();
      StepOutput out;
      if (entry.contains("probs")) {
        out.probs = vector_from_json(entry.at("probs"), "probs");
      } else {
        out.probs = softmax(vector_from_json(entry.at("logits"), "logits"));
      }
      out.hidden_last = vector_from_json(entry.at("hidden_last"), "hidden_last");
      if (entry.contains("hidden_all")) {
        HiddenList all;
        for (const auto& row : entry.at("hidden_all")) {
          all.push_back(vector_from_json(row, "hidden_all"));
        }
        out.hidden_all = std::move(all);
      }
      if (!table.emplace(prefix, std::move(out)).second) {
        throw ValidationError(
            fmt::format("duplicate scripted prefix [{}]", fmt::join(prefix, ",")));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("malformed scripted table: {}", e.what()));
  } catch (const ProtocolError& e) {
    throw ValidationError(fmt::format("malformed scripted table: {}", e.what()));
  }
  return ScriptedBackend(std::move(table), info);
}

ScriptedBackend ScriptedBackend::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ArgumentError(fmt::format("cannot open scripted table '{}'", path));
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("'{}' is not valid JSON: {}", path, e.what()));
  }
  return from_json(j);
}

nlohmann::json ScriptedBackend::to_json() const {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [prefix, out] : table_) {
    nlohmann::json e = {{"prefix", prefix},
                        {"probs", vector_to_json(out.probs)},
                        {"hidden_last", vector_to_json(out.hidden_last)}};
    if (out.hidden_all) {
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& h : *out.hidden_all) {
        rows.push_back(vector_to_json(h));
      }
      e["hidden_all"] = std::move(rows);
    }
    entries.push_back(std::move(e));
  }
  nlohmann::json j = info_to_json(info_);
  j["entries"] = std::move(entries);
  return j;
}

}  // namespace ips
