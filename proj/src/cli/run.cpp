// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <fmt/core.h>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "ips/cli.hpp"

namespace ips::cli {

namespace {

// Raw flag values; only flags that were given override the config document.
struct Flags {
  std::optional<std::string> config;
  std::optional<std::string> input;
  std::optional<std::string> output;
  std::optional<std::string> backend;
  std::optional<std::string> vocab;
  std::optional<std::string> record_id;
  std::optional<std::string> strategy;
  std::optional<std::vector<std::string>> strategies;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<std::string> penalty_form;
  std::optional<int> m;
  bool strict_isotropy = false;
  std::optional<int> first_n;
  std::optional<std::string> first_strategy;
  std::optional<int> first_k;
  std::optional<double> first_p;
  std::optional<int> top_k;
  std::optional<double> top_p;
  std::optional<int> cs_k;
  std::optional<double> cs_alpha;
  std::optional<int> beam_width;
  std::optional<int> max_new_tokens;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<int> jobs;
  std::optional<double> timeout;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config document; flags override it");
  cmd->add_option("--input", f.input, "JSONL dialogue records");
  cmd->add_option("--output", f.output, "Output path (default stdout)");
  cmd->add_option("--backend", f.backend,
                  "scripted:<path> | tiny:<seed>,<V>,<d>,<L>,<H> | remote:<url> (default $IPS_BACKEND)");
  cmd->add_option("--vocab", f.vocab, "Word-to-id JSON for text contexts");
  cmd->add_option("--alpha", f.alpha, "Weight of model confidence in IPS");
  cmd->add_option("--beta", f.beta, "Proximal/isotropic balance for --penalty-form beta");
  cmd->add_option("--penalty-form", f.penalty_form, "eq5 | beta");
  cmd->add_option("--m", f.m, "IPS candidate set size");
  cmd->add_flag("--strict-isotropy", f.strict_isotropy,
                "Score i_value without folding the candidate into the response representation");
  cmd->add_option("--first-n", f.first_n, "IPS bootstrap steps");
  cmd->add_option("--first-strategy", f.first_strategy, "topk | nucleus | greedy");
  cmd->add_option("--first-k", f.first_k, "Bootstrap top-k");
  cmd->add_option("--first-p", f.first_p, "Bootstrap nucleus mass");
  cmd->add_option("--top-k", f.top_k, "k of the top-k baseline");
  cmd->add_option("--top-p", f.top_p, "p of the nucleus baseline");
  cmd->add_option("--cs-k", f.cs_k, "Contrastive search candidate count");
  cmd->add_option("--cs-alpha", f.cs_alpha, "Contrastive search degeneration weight");
  cmd->add_option("--beam-width", f.beam_width, "Beam width");
  cmd->add_option("--max-new-tokens", f.max_new_tokens, "Generation cap");
  cmd->add_option("--jobs", f.jobs, "Records decoded in parallel");
  cmd->add_option("--timeout", f.timeout, "Remote backend timeout in seconds");
}

Options resolve(const Flags& f) {
  Options opts;
  if (const char* env = std::getenv("IPS_BACKEND")) {
    opts.backend = env;
  }
  if (f.config) {
    std::ifstream in(*f.config);
    if (!in) {
      throw ArgumentError(fmt::format("cannot open config '{}'", *f.config));
    }
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ArgumentError(fmt::format("config '{}' is not valid JSON: {}", *f.config, e.what()));
    }
    try {
      apply_config(j, opts);
    } catch (const nlohmann::json::exception& e) {
      throw ArgumentError(fmt::format("config '{}': {}", *f.config, e.what()));
    }
  }
  auto set = [](const auto& flag, auto& field) {
    if (flag) {
      field = *flag;
    }
  };
  StrategyConfig& cfg = opts.cfg;
  set(f.input, opts.input);
  set(f.output, opts.output);
  set(f.backend, opts.backend);
  set(f.vocab, opts.vocab);
  set(f.record_id, opts.record_id);
  set(f.seeds, opts.seeds);
  set(f.jobs, opts.jobs);
  set(f.timeout, opts.timeout_s);
  if (f.strategy) {
    cfg.strategy = parse_strategy(*f.strategy);
  }
  if (f.strategies) {
    opts.strategies.clear();
    for (const auto& s : *f.strategies) {
      opts.strategies.push_back(parse_strategy(s));
    }
  }
  set(f.alpha, cfg.alpha);
  set(f.beta, cfg.beta);
  if (f.penalty_form) {
    cfg.penalty_form = parse_penalty_form(*f.penalty_form);
  }
  set(f.m, cfg.m);
  if (f.strict_isotropy) {
    cfg.strict_isotropy = true;
  }
  set(f.first_n, cfg.bootstrap_n);
  if (f.first_strategy) {
    cfg.bootstrap_strategy = parse_bootstrap_strategy(*f.first_strategy);
  }
  set(f.first_k, cfg.bootstrap_k);
  set(f.first_p, cfg.bootstrap_p);
  set(f.top_k, cfg.top_k);
  set(f.top_p, cfg.top_p);
  set(f.cs_k, cfg.contrastive_k);
  set(f.cs_alpha, cfg.contrastive_alpha);
  set(f.beam_width, cfg.beam_width);
  set(f.max_new_tokens, cfg.max_new_tokens);
  set(f.seed, cfg.seed);
  return opts;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Dialogue response decoding with isotropic and proximal search"};
  app.require_subcommand(1);

  Flags gen;
  auto* generate_cmd = app.add_subcommand("generate", "Decode every record with one strategy");
  add_common(generate_cmd, gen);
  generate_cmd->add_option("--strategy", gen.strategy,
                           "greedy | beam | topk | nucleus | contrastive | ips");
  generate_cmd->add_option("--seed", gen.seed, "Sampling seed");

  Flags cmp;
  auto* compare_cmd = app.add_subcommand("compare", "Diversity and feature-space metrics per strategy");
  add_common(compare_cmd, cmp);
  compare_cmd->add_option("--strategies,--strategy", cmp.strategies, "Strategies to compare")
      ->delimiter(',');
  compare_cmd->add_option("--seeds,--seed", cmp.seeds, "Seeds averaged per strategy")->delimiter(',');

  Flags heat;
  auto* heatmap_cmd = app.add_subcommand("heatmap", "Cosine similarity CSV of one record");
  add_common(heatmap_cmd, heat);
  heatmap_cmd->add_option("--strategy", heat.strategy, "Decoding strategy");
  heatmap_cmd->add_option("--seed", heat.seed, "Sampling seed");
  heatmap_cmd->add_option("--record-id", heat.record_id, "Record to export");

  std::string serve_backend;
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "Expose a backend over the HTTP forward protocol");
  serve_cmd->add_option("--backend", serve_backend, "Backend spec")->required();
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--port", port, "Bind port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (serve_cmd->parsed()) {
    return cmd_serve(serve_backend, host, port, std::cerr);
  }

  Options opts;
  try {
    if (generate_cmd->parsed()) {
      opts = resolve(gen);
    } else if (compare_cmd->parsed()) {
      opts = resolve(cmp);
      if (opts.strategies.empty()) {
        opts.strategies.push_back(opts.cfg.strategy);
      }
      if (opts.seeds.empty()) {
        opts.seeds.push_back(opts.cfg.seed);
      }
    } else {
      opts = resolve(heat);
    }
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kUsage;
  }
  if (opts.input.empty()) {
    fmt::print(stderr, "error: --input is required\n");
    return kUsage;
  }

  if (generate_cmd->parsed()) {
    return cmd_generate(opts, std::cerr);
  }
  if (compare_cmd->parsed()) {
    return cmd_compare(opts, std::cout, std::cerr);
  }
  if (opts.record_id.empty()) {
    fmt::print(stderr, "error: --record-id is required\n");
    return kUsage;
  }
  return cmd_heatmap(opts, std::cerr);
}

}  // namespace ips::cli
