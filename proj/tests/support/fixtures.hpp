// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

// Test-only fixtures and brute-force oracles. Nothing here calls into the
// scoring or strategy code it is used to check.

#pragma once

#include <filesystem>
#include <string>

#include "ips/backend.hpp"
#include "ips/encoding.hpp"

namespace ips::testing {

struct CausalTableSpec {
  BackendInfo info{6, 4, 1};
  std::vector<DialogueContext> contexts;
  /// Generated tokens covered after each context (candidate lookups included).
  int depth = 4;
  std::uint64_t seed = 1;
  /// Probabilities become small-integer ratios so exact ties occur.
  bool quantized = false;
};

/// Scripted table over every continuation of each context up to `depth`
/// tokens (no continuation past EOU). Hidden states depend only on the prefix
/// ending at that position, so hidden_all agrees with shorter entries.
ScriptedBackend make_causal_table(const CausalTableSpec& spec);

/// Random context of `n_utt` utterances with ids in [0, V) avoiding `eou`.
DialogueContext random_context(Rng& rng, int vocab, TokenId eou, int n_utt, int max_len);

/// Hand-built table (with uniform filler for every other prefix up to three
/// generated tokens): IPS (alpha 0.6) picks a low-probability token that
/// duplicates the response so far and is orthogonal to the context, greedy
/// picks the high-probability token aligned with the context.
struct DirectionalFixture {
  std::shared_ptr<ScriptedBackend> backend;
  DialogueContext context;
  TokenId first = 0;  // bootstrap token
  TokenId token_a = 0;  // proximal, isotropic
  TokenId token_b = 0;  // more probable
};
DirectionalFixture make_directional_fixture();

/// Scripted table whose single probable path emits EOU with probability 1 at
/// step 3. Other prefixes up to three generated tokens get uniform filler.
std::shared_ptr<ScriptedBackend> make_eou_at_step3(DialogueContext& ctx);

// ---------------------------------------------------------------------------
// Oracles: plain loops over std::vector<double>.

using Plain = std::vector<double>;

Plain to_plain(const HiddenVector& v);
double oracle_cosine(const Plain& a, const Plain& b);
Plain oracle_mean(const std::vector<Plain>& vs);
double oracle_proximal(const Plain& cand, const std::vector<Plain>& generated);
double oracle_isotropic(const Plain& rep, const std::vector<Plain>& utterances);
double oracle_degeneration(const Plain& cand, const std::vector<Plain>& prefix);

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  std::filesystem::path path(const std::string& name) const { return root_ / name; }

 private:
  std::filesystem::path root_;
};

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& content);

}  // namespace ips::testing
