// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace ips::testing {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t prefix_hash(std::uint64_t seed, const TokenSequence& prefix) {
  std::uint64_t h = splitmix(seed);
  for (TokenId t : prefix) {
    h = splitmix(h ^ static_cast<std::uint64_t>(t + 1));
  }
  return h;
}

HiddenVector hidden_for(const CausalTableSpec& spec, const TokenSequence& prefix) {
  Rng rng(prefix_hash(spec.seed, prefix) ^ 0x5555);
  HiddenVector h(spec.info.hidden_dim);
  for (auto& v : h) {
    v = rng.normal();
  }
  // Keep clear of the degenerate-norm guard.
  if (h.norm() < 0.1) {
    h[0] += 1.0;
  }
  return h;
}

ProbVector probs_for(const CausalTableSpec& spec, const TokenSequence& prefix) {
  Rng rng(prefix_hash(spec.seed, prefix) ^ 0xAAAA);
  ProbVector p(spec.info.vocab_size);
  if (spec.quantized) {
    for (auto& v : p) {
      v = static_cast<double>(rng.next() % 4);
    }
    if (p.sum() == 0.0) {
      p[0] = 1.0;
    }
  } else {
    for (auto& v : p) {
      v = std::exp(1.5 * rng.normal());
    }
  }
  return p / p.sum();
}

void add_entries(const CausalTableSpec& spec, TokenSequence& prefix, int remaining,
                 ScriptedBackend::Table& table) {
  StepOutput out;
  out.probs = probs_for(spec, prefix);
  HiddenList all;
  TokenSequence partial;
  for (TokenId t : prefix) {
    partial.push_back(t);
    all.push_back(hidden_for(spec, partial));
  }
  out.hidden_last = all.back();
  out.hidden_all = std::move(all);
  table.emplace(prefix, std::move(out));
  if (remaining == 0) {
    return;
  }
  for (TokenId v = 0; v < spec.info.vocab_size; ++v) {
    prefix.push_back(v);
    if (v == spec.info.eou_token_id) {
      // Only the candidate lookup is needed past an EOU.
      add_entries(spec, prefix, 0, table);
    } else {
      add_entries(spec, prefix, remaining - 1, table);
    }
    prefix.pop_back();
  }
}

StepOutput entry(std::vector<double> probs, HiddenList all) {
  StepOutput out;
  out.probs = Eigen::Map<const ProbVector>(probs.data(), static_cast<Eigen::Index>(probs.size()));
  out.hidden_last = all.back();
  out.hidden_all = std::move(all);
  return out;
}

HiddenVector vec3(double x, double y, double z) { return HiddenVector{{x, y, z}}; }

/// Adds uniform filler entries so every prefix up to `depth` generated tokens
/// past the context has all of its children. Hand-written entries win.
void complete_table(ScriptedBackend::Table& t, const BackendInfo& info, std::size_t context_len,
                    std::size_t depth) {
  std::vector<TokenSequence> pending;
  for (const auto& [prefix, out] : t) {
    pending.push_back(prefix);
  }
  while (!pending.empty()) {
    const TokenSequence prefix = pending.back();
    pending.pop_back();
    const std::size_t generated = prefix.size() - context_len;
    if (generated >= depth || (generated > 0 && prefix.back() == info.eou_token_id)) {
      continue;
    }
    const HiddenList parent = *t.at(prefix).hidden_all;
    for (TokenId v = 0; v < info.vocab_size; ++v) {
      TokenSequence child = prefix;
      child.push_back(v);
      if (t.count(child)) {
        continue;
      }
      Rng rng(prefix_hash(0xF111, child));
      HiddenVector h(info.hidden_dim);
      for (auto& x : h) {
        x = rng.normal();
      }
      h[0] += 2.0;
      StepOutput out;
      out.probs = ProbVector::Constant(info.vocab_size, 1.0 / info.vocab_size);
      HiddenList all = parent;
      all.push_back(h);
      out.hidden_last = h;
      out.hidden_all = std::move(all);
      t.emplace(child, std::move(out));
      pending.push_back(child);
    }
  }
}

}  // namespace

ScriptedBackend make_causal_table(const CausalTableSpec& spec) {
  ScriptedBackend::Table table;
  for (const auto& ctx : spec.contexts) {
    TokenSequence prefix = encode_context(ctx, spec.info.eou_token_id).tokens;
    add_entries(spec, prefix, spec.depth, table);
  }
  return ScriptedBackend(std::move(table), spec.info);
}

DialogueContext random_context(Rng& rng, int vocab, TokenId eou, int n_utt, int max_len) {
  DialogueContext ctx;
  for (int u = 0; u < n_utt; ++u) {
    TokenSequence utt;
    const int len = 1 + static_cast<int>(rng.next() % static_cast<std::uint64_t>(max_len));
    while (static_cast<int>(utt.size()) < len) {
      const auto t = static_cast<TokenId>(rng.next() % static_cast<std::uint64_t>(vocab));
      if (t != eou) {
        utt.push_back(t);
      }
    }
    ctx.utterances.push_back(std::move(utt));
  }
  return ctx;
}

DirectionalFixture make_directional_fixture() {
  const BackendInfo info{6, 3, 1};
  const HiddenVector e1 = vec3(1, 0, 0);
  const HiddenVector e2 = vec3(0, 1, 0);
  const HiddenVector e3 = vec3(0, 0, 1);
  const HiddenVector big_e2 = 1000.0 * e2;

  ScriptedBackend::Table t;
  // Context [3] EOU; the utterance representation is e2.
  t[{3, 1}] = entry({0.02, 0.02, 0.9, 0.02, 0.02, 0.02}, {e3, e2});
  // After bootstrap token 2 (hidden e1): B = 4 is more probable, A = 5 is not.
  t[{3, 1, 2}] = entry({0.025, 0.025, 0.025, 0.025, 0.6, 0.3}, {e3, e2, e1});
  t[{3, 1, 2, 5}] = entry({0, 1, 0, 0, 0, 0}, {e3, e2, e1, e1});
  t[{3, 1, 2, 4}] = entry({0, 1, 0, 0, 0, 0}, {e3, e2, e1, big_e2});
  t[{3, 1, 2, 5, 1}] = entry({1, 0, 0, 0, 0, 0}, {e3, e2, e1, e1, e1});
  t[{3, 1, 2, 5, 0}] = entry({1, 0, 0, 0, 0, 0}, {e3, e2, e1, e1, e3});
  t[{3, 1, 2, 4, 1}] = entry({1, 0, 0, 0, 0, 0}, {e3, e2, e1, big_e2, e1});
  t[{3, 1, 2, 4, 0}] = entry({1, 0, 0, 0, 0, 0}, {e3, e2, e1, big_e2, e3});
  complete_table(t, info, 2, 3);

  DirectionalFixture f;
  f.backend = std::make_shared<ScriptedBackend>(std::move(t), info);
  f.context.utterances = {{3}};
  f.first = 2;
  f.token_a = 5;
  f.token_b = 4;
  return f;
}

std::shared_ptr<ScriptedBackend> make_eou_at_step3(DialogueContext& ctx) {
  const BackendInfo info{6, 3, 1};
  ctx.utterances = {{3}};
  ScriptedBackend::Table t;
  const HiddenVector a = vec3(1, 0, 0);
  const HiddenVector b = vec3(0, 1, 0);
  const HiddenVector c = vec3(0, 0, 1);
  const HiddenVector d = vec3(1, 1, 0);
  t[{3, 1}] = entry({0, 0, 0, 0, 1, 0}, {a, b});
  t[{3, 1, 4}] = entry({0, 0, 0, 0, 0, 1}, {a, b, c});
  t[{3, 1, 4, 5}] = entry({0, 1, 0, 0, 0, 0}, {a, b, c, d});
  t[{3, 1, 4, 5, 1}] = entry({0, 1, 0, 0, 0, 0}, {a, b, c, d, a});
  complete_table(t, info, 2, 3);
  return std::make_shared<ScriptedBackend>(std::move(t), info);
}

// ---------------------------------------------------------------------------

Plain to_plain(const HiddenVector& v) { return Plain(v.data(), v.data() + v.size()); }

double oracle_cosine(const Plain& a, const Plain& b) {
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

Plain oracle_mean(const std::vector<Plain>& vs) {
  Plain m(vs.front().size(), 0.0);
  for (const auto& v : vs) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      m[i] += v[i];
    }
  }
  for (auto& x : m) {
    x /= static_cast<double>(vs.size());
  }
  return m;
}

double oracle_proximal(const Plain& cand, const std::vector<Plain>& generated) {
  if (generated.empty()) {
    return 0.0;
  }
  double s = 0.0;
  for (const auto& g : generated) {
    s += oracle_cosine(cand, g);
  }
  return s / static_cast<double>(generated.size());
}

double oracle_isotropic(const Plain& rep, const std::vector<Plain>& utterances) {
  double s = 0.0;
  for (const auto& u : utterances) {
    s += oracle_cosine(rep, u);
  }
  return s / static_cast<double>(utterances.size());
}

double oracle_degeneration(const Plain& cand, const std::vector<Plain>& prefix) {
  double best = -2.0;
  for (const auto& p : prefix) {
    best = std::max(best, oracle_cosine(cand, p));
  }
  return best;
}

// ---------------------------------------------------------------------------

TempDir::TempDir() {
  std::random_device rd;
  root_ = std::filesystem::temp_directory_path() /
          ("ips-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
  std::filesystem::create_directories(root_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(root_, ec);
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

}  // namespace ips::testing
