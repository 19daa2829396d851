// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

#include <fmt/core.h>
#include <fmt/ostream.h>

#include <atomic>
#include <exception>
#include <fstream>
#include <iostream>
#include <thread>

#include "ips/cli.hpp"
#include "ips/metrics.hpp"
#include "ips/server.hpp"

namespace ips::cli {

namespace {

std::string fixed6(double v) { return fmt::format("{:.6f}", v); }

Tokenizer make_tokenizer(const Options& opts) {
  return opts.vocab.empty() ? Tokenizer::passthrough() : Tokenizer::load_vocab(opts.vocab);
}

std::vector<DialogueRecord> load_records(const Options& opts, const Tokenizer& tokenizer) {
  std::ifstream in(opts.input);
  if (!in) {
    throw ArgumentError(fmt::format("cannot open input '{}'", opts.input));
  }
  return read_records(in, tokenizer);
}

/// Output stream for `path`; "-" or empty means stdout.
class OutputFile {
 public:
  explicit OutputFile(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) {
        throw ArgumentError(fmt::format("cannot open output '{}'", path));
      }
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

struct Prepared {
  Tokenizer tokenizer;
  std::vector<DialogueRecord> records;
  BackendPtr backend;
};

/// Loads everything a command needs, mapping each failure to its exit code.
std::optional<Prepared> prepare(const Options& opts, std::ostream& err, int& code) {
  Prepared p;
  try {
    p.tokenizer = make_tokenizer(opts);
  } catch (const Error& e) {
    fmt::print(err, "error: {}\n", e.what());
    code = kUsage;
    return std::nullopt;
  }
  try {
    p.records = load_records(opts, p.tokenizer);
  } catch (const Error& e) {
    fmt::print(err, "error: {}: {}\n", opts.input, e.what());
    code = kBadInput;
    return std::nullopt;
  }
  if (opts.backend.empty()) {
    fmt::print(err, "error: no backend given (--backend or IPS_BACKEND)\n");
    code = kUsage;
    return std::nullopt;
  }
  try {
    p.backend = make_backend(opts.backend, opts.timeout_s);
  } catch (const Error& e) {
    fmt::print(err, "error: backend '{}': {}\n", opts.backend, e.what());
    code = kBackendFailure;
    return std::nullopt;
  }
  try {
    check_records(p.records, p.backend->info());
  } catch (const InputError& e) {
    fmt::print(err, "error: {}: {}\n", opts.input, e.what());
    code = kBadInput;
    return std::nullopt;
  }
  return p;
}

bool check_config(const StrategyConfig& cfg, const BackendInfo& info, std::ostream& err) {
  try {
    validate_config(cfg, info.vocab_size);
    return true;
  } catch (const Error& e) {
    fmt::print(err, "error: {}\n", e.what());
    return false;
  }
}

}  // namespace

std::vector<GenerationResult> generate_all(const Backend& backend,
                                           const std::vector<DialogueRecord>& records,
                                           const StrategyConfig& cfg, int jobs) {
  std::vector<GenerationResult> results(records.size());
  std::vector<std::exception_ptr> errors(records.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < records.size(); i = next++) {
      try {
        results[i] = generate(backend, records[i].context, cfg);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp<int>(jobs, 1, static_cast<int>(std::max<std::size_t>(records.size(), 1)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back(worker);
    }
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
  return results;
}

CompareRow evaluate_corpus(const Backend& backend, const std::vector<DialogueRecord>& records,
                           const std::vector<GenerationResult>& results, Strategy strategy) {
  const TokenId eou = backend.info().eou_token_id;
  CompareRow row;
  row.strategy = strategy;

  std::vector<TokenSequence> responses;
  double intra = 0.0;
  double context = 0.0;
  std::size_t scored = 0;
  double elapsed = 0.0;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const GenerationResult& res = results[r];
    responses.push_back(strip_token(res.tokens, eou));
    elapsed += res.elapsed_s;
    if (responses.back().empty()) {
      continue;
    }
    const EncodedContext enc = encode_context(records[r].context, eou);
    TokenSequence sequence = enc.tokens;
    std::vector<std::size_t> positions = enc.eou_positions;
    for (TokenId t : res.tokens) {
      if (t != eou) {
        positions.push_back(sequence.size());
      }
      sequence.push_back(t);
    }
    HiddenList hiddens = position_hiddens(backend, sequence, positions);
    const auto n_utt = static_cast<std::ptrdiff_t>(enc.eou_positions.size());
    HiddenList reps(hiddens.begin(), hiddens.begin() + n_utt);
    HiddenList response(hiddens.begin() + n_utt, hiddens.end());
    const Diagnostics d = diagnostics(res, response, reps);
    intra += d.mean_intra_response_cosine;
    context += d.mean_context_cosine;
    ++scored;
  }
  row.distinct_2 = distinct_n(responses, 2);
  row.distinct_4 = distinct_n(responses, 4);
  if (scored > 0) {
    row.mean_intra_response_cosine = intra / static_cast<double>(scored);
    row.mean_context_cosine = context / static_cast<double>(scored);
  }
  if (!records.empty()) {
    row.mean_elapsed_s = elapsed / static_cast<double>(records.size());
  }
  return row;
}

int cmd_generate(const Options& opts, std::ostream& err) {
  int code = kOk;
  auto prepared = prepare(opts, err, code);
  if (!prepared) {
    return code;
  }
  const Backend& backend = *prepared->backend;
  if (!check_config(opts.cfg, backend.info(), err)) {
    return kUsage;
  }
  std::vector<GenerationResult> results;
  try {
    results = generate_all(backend, prepared->records, opts.cfg, opts.jobs);
  } catch (const Error& e) {
    fmt::print(err, "error: generation failed: {}\n", e.what());
    return kBackendFailure;
  }
  try {
    OutputFile out(opts.output);
    for (std::size_t i = 0; i < results.size(); ++i) {
      out.stream() << format_result_line(prepared->records[i], opts.cfg.strategy, results[i],
                                         prepared->tokenizer)
                   << '\n';
    }
  } catch (const Error& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kUsage;
  }
  return kOk;
}

int cmd_compare(const Options& opts, std::ostream& out, std::ostream& err) {
  if (opts.strategies.empty() || opts.seeds.empty()) {
    fmt::print(err, "error: compare needs at least one strategy and one seed\n");
    return kUsage;
  }
  int code = kOk;
  auto prepared = prepare(opts, err, code);
  if (!prepared) {
    return code;
  }
  const Backend& backend = *prepared->backend;

  struct Row {
    CompareRow mean;
    std::vector<CompareRow> per_seed;
  };
  std::vector<Row> rows;
  try {
    for (Strategy s : opts.strategies) {
      Row row;
      row.mean.strategy = s;
      for (std::uint64_t seed : opts.seeds) {
        StrategyConfig cfg = opts.cfg;
        cfg.strategy = s;
        cfg.seed = seed;
        if (!check_config(cfg, backend.info(), err)) {
          return kUsage;
        }
        const auto results = generate_all(backend, prepared->records, cfg, opts.jobs);
        row.per_seed.push_back(evaluate_corpus(backend, prepared->records, results, s));
      }
      for (const auto& r : row.per_seed) {
        row.mean.distinct_2 += r.distinct_2;
        row.mean.distinct_4 += r.distinct_4;
        row.mean.mean_intra_response_cosine += r.mean_intra_response_cosine;
        row.mean.mean_context_cosine += r.mean_context_cosine;
        row.mean.mean_elapsed_s += r.mean_elapsed_s;
      }
      const double n = static_cast<double>(row.per_seed.size());
      row.mean.distinct_2 /= n;
      row.mean.distinct_4 /= n;
      row.mean.mean_intra_response_cosine /= n;
      row.mean.mean_context_cosine /= n;
      row.mean.mean_elapsed_s /= n;
      rows.push_back(std::move(row));
    }
  } catch (const Error& e) {
    fmt::print(err, "error: generation failed: {}\n", e.what());
    return kBackendFailure;
  }

  auto metrics_json = [](const CompareRow& r) {
    return fmt::format(
        "\"distinct_2\":{},\"distinct_4\":{},\"mean_intra_response_cosine\":{},"
        "\"mean_context_cosine\":{},\"mean_elapsed_s\":{}",
        fixed6(r.distinct_2), fixed6(r.distinct_4), fixed6(r.mean_intra_response_cosine),
        fixed6(r.mean_context_cosine), fixed6(r.mean_elapsed_s));
  };
  std::string json = "{\"seeds\":[";
  for (std::size_t i = 0; i < opts.seeds.size(); ++i) {
    json += (i > 0 ? "," : "") + std::to_string(opts.seeds[i]);
  }
  json += "],\"rows\":[";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& row = rows[i];
    json += fmt::format("{}{{\"strategy\":\"{}\",{},\"per_seed\":[", i > 0 ? "," : "",
                        to_string(row.mean.strategy), metrics_json(row.mean));
    for (std::size_t s = 0; s < row.per_seed.size(); ++s) {
      json += fmt::format("{}{{\"seed\":{},{}}}", s > 0 ? "," : "", opts.seeds[s],
                          metrics_json(row.per_seed[s]));
    }
    json += "]}";
  }
  json += "]}\n";

  fmt::print(out, "{:<12} {:>10} {:>10} {:>12} {:>12} {:>12}\n", "strategy", "distinct-2",
             "distinct-4", "intra-cos", "context-cos", "elapsed-s");
  for (const auto& row : rows) {
    const CompareRow& r = row.mean;
    fmt::print(out, "{:<12} {:>10.6f} {:>10.6f} {:>12.6f} {:>12.6f} {:>12.6f}\n",
               to_string(r.strategy), r.distinct_2, r.distinct_4, r.mean_intra_response_cosine,
               r.mean_context_cosine, r.mean_elapsed_s);
  }
  if (opts.output.empty() || opts.output == "-") {
    out << json;
  } else {
    try {
      OutputFile file(opts.output);
      file.stream() << json;
    } catch (const Error& e) {
      fmt::print(err, "error: {}\n", e.what());
      return kUsage;
    }
  }
  return kOk;
}

int cmd_heatmap(const Options& opts, std::ostream& err) {
  int code = kOk;
  auto prepared = prepare(opts, err, code);
  if (!prepared) {
    return code;
  }
  const auto& records = prepared->records;
  const auto it = std::find_if(records.begin(), records.end(),
                               [&](const DialogueRecord& r) { return r.id == opts.record_id; });
  if (it == records.end()) {
    fmt::print(err, "error: record id '{}' not found in {}\n", opts.record_id, opts.input);
    return kMissingRecord;
  }
  const Backend& backend = *prepared->backend;
  if (!check_config(opts.cfg, backend.info(), err)) {
    return kUsage;
  }
  const TokenId eou = backend.info().eou_token_id;
  std::vector<std::string> labels;
  Matrix<double> matrix;
  try {
    const GenerationResult result = generate(backend, it->context, opts.cfg);
    const EncodedContext enc = encode_context(it->context, eou);
    TokenSequence sequence = enc.tokens;
    sequence.insert(sequence.end(), result.tokens.begin(), result.tokens.end());
    std::vector<std::size_t> positions;
    for (std::size_t i = 0; i < sequence.size(); ++i) {
      if (sequence[i] != eou) {
        positions.push_back(i);
        labels.push_back(prepared->tokenizer.label(sequence[i]));
      }
    }
    matrix = similarity_heatmap(position_hiddens(backend, sequence, positions));
  } catch (const Error& e) {
    fmt::print(err, "error: generation failed: {}\n", e.what());
    return kBackendFailure;
  }
  try {
    OutputFile out(opts.output);
    write_heatmap_csv(out.stream(), labels, matrix);
  } catch (const Error& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kUsage;
  }
  return kOk;
}

int cmd_serve(const std::string& backend_spec, const std::string& host, int port,
              std::ostream& err) {
  BackendPtr backend;
  try {
    backend = make_backend(backend_spec);
  } catch (const Error& e) {
    fmt::print(err, "error: backend '{}': {}\n", backend_spec, e.what());
    return kBackendFailure;
  }
  BackendServer server(backend);
  if (!server.bind(host, port)) {
    fmt::print(err, "error: cannot bind {}:{}\n", host, port);
    return kUsage;
  }
  fmt::print(err, "serving on http://{}:{}\n", host, port);
  server.serve();
  return kOk;
}

}  // namespace ips::cli
