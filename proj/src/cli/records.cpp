// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

#include <fmt/core.h>

#include <istream>

#include "ips/cli.hpp"

namespace ips::cli {

namespace {

std::string fixed6(double v) { return fmt::format("{:.6f}", v); }

std::string quoted(const std::string& s) { return nlohmann::json(s).dump(); }

template <typename Range>
std::string int_array(const Range& values) {
  std::string out = "[";
  bool first = true;
  for (auto v : values) {
    if (!first) {
      out += ',';
    }
    out += std::to_string(v);
    first = false;
  }
  return out + "]";
}

DialogueRecord parse_record(const nlohmann::json& j, const Tokenizer& tokenizer, int line) {
  if (!j.is_object()) {
    throw InputError(line, "record must be a JSON object");
  }
  DialogueRecord rec;
  rec.line = line;
  if (!j.contains("id") || !j["id"].is_string()) {
    throw InputError(line, "record needs a string 'id'");
  }
  rec.id = j["id"].get<std::string>();
  if (j.contains("context_tokens")) {
    const auto& ctx = j["context_tokens"];
    if (!ctx.is_array()) {
      throw InputError(line, "'context_tokens' must be a list of token-id lists");
    }
    for (const auto& utt : ctx) {
      if (!utt.is_array() ||
          !std::all_of(utt.begin(), utt.end(), [](const auto& t) { return t.is_number_integer(); })) {
        throw InputError(line, "'context_tokens' must be a list of token-id lists");
      }
      rec.context.utterances.push_back(utt.get<TokenSequence>());
    }
  } else if (j.contains("context")) {
    if (tokenizer.mode() != Tokenizer::Mode::whitespace) {
      throw InputError(line, "text 'context' needs a vocabulary (--vocab)");
    }
    const auto& ctx = j["context"];
    if (!ctx.is_array()) {
      throw InputError(line, "'context' must be a list of strings");
    }
    for (const auto& utt : ctx) {
      if (!utt.is_string()) {
        throw InputError(line, "'context' must be a list of strings");
      }
      rec.context.utterances.push_back(tokenizer.encode(utt.get<std::string>()));
    }
  } else {
    throw InputError(line, "record needs 'context_tokens' or 'context'");
  }
  if (rec.context.utterances.empty()) {
    throw InputError(line, "record has no utterances");
  }
  for (const auto& utt : rec.context.utterances) {
    if (utt.empty()) {
      throw InputError(line, "record has an empty utterance");
    }
  }
  if (j.contains("reference") && !j["reference"].is_null()) {
    try {
      rec.reference = j["reference"].get<TokenSequence>();
    } catch (const nlohmann::json::exception&) {
      throw InputError(line, "'reference' must be a token-id list");
    }
  }
  return rec;
}

}  // namespace

std::vector<DialogueRecord> read_records(std::istream& in, const Tokenizer& tokenizer) {
  std::vector<DialogueRecord> records;
  std::string text;
  int line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(line, fmt::format("invalid JSON: {}", e.what()));
    }
    records.push_back(parse_record(j, tokenizer, line));
  }
  return records;
}

void check_records(const std::vector<DialogueRecord>& records, const BackendInfo& info) {
  for (const auto& rec : records) {
    for (const auto& utt : rec.context.utterances) {
      for (TokenId t : utt) {
        if (t < 0 || t >= info.vocab_size) {
          throw InputError(rec.line, fmt::format("token id {} outside vocabulary of size {}", t,
                                                 info.vocab_size));
        }
        if (t == info.eou_token_id) {
          throw InputError(rec.line, fmt::format("utterance contains the EOU id {}", t));
        }
      }
    }
  }
}

void apply_config(const nlohmann::json& j, Options& opts) {
  if (!j.is_object()) {
    throw ArgumentError("config must be a JSON object");
  }
  nlohmann::json strategy_fields = nlohmann::json::object();
  for (const auto& [key, value] : j.items()) {
    if (key == "input") {
      opts.input = value.get<std::string>();
    } else if (key == "output") {
      opts.output = value.get<std::string>();
    } else if (key == "backend") {
      opts.backend = value.get<std::string>();
    } else if (key == "vocab") {
      opts.vocab = value.get<std::string>();
    } else if (key == "record_id") {
      opts.record_id = value.get<std::string>();
    } else if (key == "strategies") {
      opts.strategies.clear();
      for (const auto& s : value) {
        opts.strategies.push_back(parse_strategy(s.get<std::string>()));
      }
    } else if (key == "seeds") {
      opts.seeds = value.get<std::vector<std::uint64_t>>();
    } else if (key == "jobs") {
      opts.jobs = value.get<int>();
    } else if (key == "timeout") {
      opts.timeout_s = value.get<double>();
    } else {
      strategy_fields[key] = value;
    }
  }
  from_json(strategy_fields, opts.cfg);
}

std::string format_result_line(const DialogueRecord& record, Strategy strategy,
                               const GenerationResult& result, const Tokenizer& tokenizer) {
  std::string out = "{\"id\":" + quoted(record.id);
  out += ",\"strategy\":" + quoted(to_string(strategy));
  out += ",\"tokens\":" + int_array(result.tokens);
  if (tokenizer.mode() == Tokenizer::Mode::whitespace) {
    out += ",\"text\":" + quoted(tokenizer.decode(result.tokens));
  } else if (result.text) {
    out += ",\"text\":" + quoted(*result.text);
  }
  out += ",\"stop_reason\":" + quoted(to_string(result.stop_reason));
  out += ",\"elapsed_s\":" + fixed6(result.elapsed_s);
  out += ",\"trace\":[";
  for (std::size_t i = 0; i < result.per_step.size(); ++i) {
    const StepRecord& s = result.per_step[i];
    if (i > 0) {
      out += ',';
    }
    out += fmt::format("{{\"token\":{},\"prob\":{}", s.token, fixed6(s.prob));
    if (s.p_value) {
      out += ",\"p_value\":" + fixed6(*s.p_value);
    }
    if (s.i_value) {
      out += ",\"i_value\":" + fixed6(*s.i_value);
    }
    if (s.penalty) {
      out += ",\"penalty\":" + fixed6(*s.penalty);
    }
    out += ",\"score\":" + fixed6(s.score);
    if (s.bootstrap) {
      out += ",\"bootstrap\":true";
    }
    if (!s.candidates.empty()) {
      out += ",\"candidates\":[";
      for (std::size_t c = 0; c < s.candidates.size(); ++c) {
        const CandidateScore& cand = s.candidates[c];
        if (c > 0) {
          out += ',';
        }
        out += fmt::format("{{\"token\":{},\"prob\":{}", cand.token, fixed6(cand.prob));
        if (strategy == Strategy::contrastive) {
          out += ",\"penalty\":" + fixed6(cand.penalty);
        } else {
          out += ",\"p_value\":" + fixed6(cand.p_value) + ",\"i_value\":" + fixed6(cand.i_value);
        }
        out += ",\"score\":" + fixed6(cand.score) + "}";
      }
      out += ']';
    }
    out += '}';
  }
  out += "]}";
  return out;
}

}  // namespace ips::cli
