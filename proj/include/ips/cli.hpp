// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "ips/encoding.hpp"
#include "ips/strategies.hpp"

namespace ips::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kBadInput = 2,
  kBackendFailure = 3,
  kMissingRecord = 4,
};

struct DialogueRecord {
  std::string id;
  DialogueContext context;
  std::optional<TokenSequence> reference;
  int line = 0;
};

/// Input line that cannot be parsed; line() is 1-based.
class InputError : public Error {
 public:
  InputError(int line, const std::string& detail)
      : Error("line " + std::to_string(line) + ": " + detail), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Parses JSONL dialogue records. Blank lines are skipped. Records with a
/// "context" string list need a whitespace tokenizer.
std::vector<DialogueRecord> read_records(std::istream& in, const Tokenizer& tokenizer);

/// Rejects records whose ids fall outside the backend vocabulary or that
/// contain the EOU id.
void check_records(const std::vector<DialogueRecord>& records, const BackendInfo& info);

struct Options {
  std::string input;
  std::string output;
  std::string backend;
  std::string vocab;
  std::string record_id;
  std::vector<Strategy> strategies;
  std::vector<std::uint64_t> seeds;
  int jobs = 1;
  double timeout_s = 30.0;
  StrategyConfig cfg;
};

/// Applies a config document: strategy fields plus the run-level keys
/// "input", "output", "backend", "vocab", "record_id", "strategies", "seeds",
/// "jobs" and "timeout".
void apply_config(const nlohmann::json& j, Options& opts);

/// One output line (no trailing newline). Fixed key order, six fractional digits.
std::string format_result_line(const DialogueRecord& record, Strategy strategy,
                               const GenerationResult& result, const Tokenizer& tokenizer);

/// Generates every record in input order, running up to `jobs` at once.
std::vector<GenerationResult> generate_all(const Backend& backend,
                                           const std::vector<DialogueRecord>& records,
                                           const StrategyConfig& cfg, int jobs);

struct CompareRow {
  Strategy strategy = Strategy::greedy;
  double distinct_2 = 0.0;
  double distinct_4 = 0.0;
  double mean_intra_response_cosine = 0.0;
  double mean_context_cosine = 0.0;
  double mean_elapsed_s = 0.0;
};

/// Per-seed metrics of one strategy over the corpus.
CompareRow evaluate_corpus(const Backend& backend, const std::vector<DialogueRecord>& records,
                           const std::vector<GenerationResult>& results, Strategy strategy);

int cmd_generate(const Options& opts, std::ostream& err);
int cmd_compare(const Options& opts, std::ostream& out, std::ostream& err);
int cmd_heatmap(const Options& opts, std::ostream& err);
int cmd_serve(const std::string& backend, const std::string& host, int port, std::ostream& err);

/// Full command-line entry point.
int run(int argc, char** argv);

}  // namespace ips::cli
