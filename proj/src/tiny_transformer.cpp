// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fmt/core.h>

#include "ips/backend.hpp"

namespace ips {

namespace {

using Vec = Vector<double>;
using Mat = Matrix<double>;

Mat random_matrix(Rng& rng, int rows, int cols, double stddev) {
  Mat m(rows, cols);
  // Column-major fill order is part of the weight definition.
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      m(r, c) = stddev * rng.normal();
    }
  }
  return m;
}

Vec layer_norm(const Vec& x) {
  constexpr double kEps = 1e-5;
  const Vec centered = x.array() - x.mean();
  const double var = centered.squaredNorm() / static_cast<double>(x.size());
  return centered / std::sqrt(var + kEps);
}

Vec gelu(const Vec& x) {
  return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); });
}

}  // namespace

struct TinyTransformer::Weights {
  struct Layer {
    Mat qkv;  // 3d x d
    Mat proj;  // d x d
    Mat up;  // 4d x d
    Vec up_bias;
    Mat down;  // d x 4d
    Vec down_bias;
  };
  Mat token_embedding;  // V x d
  Mat position_embedding;  // P x d
  std::vector<Layer> layers;
  Mat output;  // V x d
};

// Per-layer keys and values of every processed position, one row each.
struct TinyTransformer::Cache {
  std::vector<Mat> keys;
  std::vector<Mat> values;
  int length = 0;
};

TinyTransformer::TinyTransformer(const TinyTransformerConfig& cfg) : cfg_(cfg) {
  if (cfg.vocab_size < 2 || cfg.hidden_dim < 1 || cfg.layers < 1 || cfg.heads < 1 ||
      cfg.max_positions < 1) {
    throw ArgumentError(fmt::format("invalid tiny transformer shape V={} d={} L={} H={}",
                                    cfg.vocab_size, cfg.hidden_dim, cfg.layers, cfg.heads));
  }
  if (cfg.hidden_dim % cfg.heads != 0) {
    throw ArgumentError(
        fmt::format("hidden_dim {} not divisible by heads {}", cfg.hidden_dim, cfg.heads));
  }
  cfg_.eou_token_id = std::min<TokenId>(cfg.eou_token_id, cfg.vocab_size - 1);
  info_ = BackendInfo{cfg.vocab_size, cfg.hidden_dim, cfg_.eou_token_id};

  const int d = cfg.hidden_dim;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  Rng rng(cfg.seed);
  auto w = std::make_unique<Weights>();
  w->token_embedding = random_matrix(rng, cfg.vocab_size, d, 1.0);
  w->position_embedding = random_matrix(rng, cfg.max_positions, d, 0.5);
  for (int l = 0; l < cfg.layers; ++l) {
    Weights::Layer layer;
    layer.qkv = random_matrix(rng, 3 * d, d, inv_sqrt_d);
    layer.proj = random_matrix(rng, d, d, inv_sqrt_d);
    layer.up = random_matrix(rng, 4 * d, d, inv_sqrt_d);
    layer.up_bias = random_matrix(rng, 4 * d, 1, 0.1);
    layer.down = random_matrix(rng, d, 4 * d, 0.5 * inv_sqrt_d);
    layer.down_bias = random_matrix(rng, d, 1, 0.1);
    w->layers.push_back(std::move(layer));
  }
  // A logit scale above 1 keeps the distributions peaked enough to be interesting.
  w->output = random_matrix(rng, cfg.vocab_size, d, 2.0 * inv_sqrt_d);
  weights_ = std::move(w);
}

TinyTransformer::~TinyTransformer() = default;

HiddenVector TinyTransformer::step(TokenId token, Cache& cache) const {
  const auto& w = *weights_;
  const int d = cfg_.hidden_dim;
  const int head_dim = d / cfg_.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  const int pos = cache.length;
  if (pos >= cfg_.max_positions) {
    throw ArgumentError(
        fmt::format("prefix longer than the {} supported positions", cfg_.max_positions));
  }

  Vec x = w.token_embedding.row(token).transpose() + w.position_embedding.row(pos).transpose();
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    const auto& layer = w.layers[l];
    const Vec qkv = layer.qkv * layer_norm(x);
    Mat& keys = cache.keys[l];
    Mat& values = cache.values[l];
    keys.conservativeResize(pos + 1, d);
    values.conservativeResize(pos + 1, d);
    keys.row(pos) = qkv.segment(d, d).transpose();
    values.row(pos) = qkv.segment(2 * d, d).transpose();

    Vec attn(d);
    for (int h = 0; h < cfg_.heads; ++h) {
      const Vec q = qkv.segment(h * head_dim, head_dim);
      Vec a = keys.middleCols(h * head_dim, head_dim) * q * scale;
      a = (a.array() - a.maxCoeff()).exp();
      a /= a.sum();
      attn.segment(h * head_dim, head_dim) =
          values.middleCols(h * head_dim, head_dim).transpose() * a;
    }
    x += layer.proj * attn;
    x += layer.down * gelu(layer.up * layer_norm(x) + layer.up_bias) + layer.down_bias;
  }
  cache.length = pos + 1;
  return layer_norm(x);
}

void TinyTransformer::run_prefix(std::span<const TokenId> prefix, Cache& cache,
                                 HiddenList* all) const {
  cache.keys.assign(weights_->layers.size(), Mat(0, cfg_.hidden_dim));
  cache.values.assign(weights_->layers.size(), Mat(0, cfg_.hidden_dim));
  cache.length = 0;
  for (TokenId t : prefix) {
    HiddenVector h = step(t, cache);
    if (all != nullptr) {
      all->push_back(std::move(h));
    }
  }
}

ProbVector TinyTransformer::probabilities(const HiddenVector& hidden) const {
  return softmax(weights_->output * hidden);
}

StepOutput TinyTransformer::do_forward(std::span<const TokenId> prefix,
                                       bool want_all_hidden) const {
  Cache cache;
  HiddenList all;
  all.reserve(prefix.size());
  run_prefix(prefix, cache, &all);
  StepOutput out;
  out.hidden_last = all.back();
  out.probs = probabilities(out.hidden_last);
  if (want_all_hidden) {
    out.hidden_all = std::move(all);
  }
  return out;
}

HiddenList TinyTransformer::do_forward_candidates(std::span<const TokenId> prefix,
                                                  std::span<const TokenId> candidates) const {
  Cache base;
  run_prefix(prefix, base, nullptr);
  HiddenList out;
  out.reserve(candidates.size());
  for (TokenId c : candidates) {
    Cache cache = base;
    out.push_back(step(c, cache));
  }
  return out;
}

}  // namespace ips
