// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

// Scoring formulas for isotropic and proximal search and for the contrastive
// search baseline. Everything here is a pure function over Eigen expressions.

#pragma once

#include <algorithm>
#include <cmath>
#include <fmt/core.h>
#include <span>

#include "ips/core.hpp"

namespace ips {

inline constexpr double kMinNorm = 1e-12;

/// Cosine similarity, clamped into [-1, 1].
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine(const Eigen::MatrixBase<DerivedA>& a,
                                 const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) {
    throw DimensionError(fmt::format("cosine of vectors with sizes {} and {}", a.size(), b.size()));
  }
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (!(na > kMinNorm) || !(nb > kMinNorm)) {
    throw DegenerateVector("cosine of a near-zero vector");
  }
  const Scalar c = a.dot(b) / (na * nb);
  return std::clamp(c, Scalar(-1), Scalar(1));
}

/// Mean of `generated` plus `candidate` when given (divisor counts both).
template <typename Scalar>
Vector<Scalar> response_representation(std::span<const Vector<Scalar>> generated,
                                       const Vector<Scalar>* candidate = nullptr) {
  if (generated.empty() && candidate == nullptr) {
    throw ArgumentError("response representation of zero vectors");
  }
  const Eigen::Index dim = generated.empty() ? candidate->size() : generated.front().size();
  Vector<Scalar> sum = Vector<Scalar>::Zero(dim);
  for (const auto& h : generated) {
    if (h.size() != dim) {
      throw DimensionError("mixed hidden sizes in response representation");
    }
    sum += h;
  }
  Scalar count = static_cast<Scalar>(generated.size());
  if (candidate != nullptr) {
    if (candidate->size() != dim) {
      throw DimensionError("candidate size differs from generated hiddens");
    }
    sum += *candidate;
    count += 1;
  }
  return sum / count;
}

inline HiddenVector response_representation(const HiddenList& generated,
                                            const HiddenVector* candidate = nullptr) {
  return response_representation<double>(std::span<const HiddenVector>(generated), candidate);
}

/// Mean cosine of the candidate against every generated token; 0 for an empty history.
template <typename Derived>
typename Derived::Scalar proximal_value(
    const Eigen::MatrixBase<Derived>& candidate,
    std::span<const Vector<typename Derived::Scalar>> generated) {
  using Scalar = typename Derived::Scalar;
  if (generated.empty()) {
    return Scalar(0);
  }
  Scalar sum = 0;
  for (const auto& h : generated) {
    sum += cosine(candidate, h);
  }
  return sum / static_cast<Scalar>(generated.size());
}

/// Mean cosine of the response representation against each utterance representation.
template <typename Derived>
typename Derived::Scalar isotropic_value(
    const Eigen::MatrixBase<Derived>& response_rep,
    std::span<const Vector<typename Derived::Scalar>> utterance_reps) {
  using Scalar = typename Derived::Scalar;
  if (utterance_reps.empty()) {
    throw ArgumentError("isotropic value needs at least one utterance representation");
  }
  Scalar sum = 0;
  for (const auto& u : utterance_reps) {
    sum += cosine(response_rep, u);
  }
  return sum / static_cast<Scalar>(utterance_reps.size());
}

/// The bracketed penalty term: p - i, or (1 - beta) p - beta i.
inline double ips_penalty(double p_value, double i_value, const StrategyConfig& cfg) {
  switch (cfg.penalty_form) {
    case PenaltyForm::eq5:
      return p_value - i_value;
    case PenaltyForm::beta:
      return (1.0 - cfg.beta) * p_value - cfg.beta * i_value;
  }
  return 0.0;
}

inline double ips_score(double prob, double p_value, double i_value, const StrategyConfig& cfg) {
  return cfg.alpha * prob + (1.0 - cfg.alpha) * ips_penalty(p_value, i_value, cfg);
}

/// Max cosine of the candidate against any prefix token.
template <typename Derived>
typename Derived::Scalar degeneration_penalty(
    const Eigen::MatrixBase<Derived>& candidate,
    std::span<const Vector<typename Derived::Scalar>> prefix) {
  using Scalar = typename Derived::Scalar;
  if (prefix.empty()) {
    throw ArgumentError("degeneration penalty over an empty prefix");
  }
  Scalar best = -1;
  for (const auto& h : prefix) {
    best = std::max(best, cosine(candidate, h));
  }
  return best;
}

inline double contrastive_score(double prob, double penalty, double alpha_cs) {
  return (1.0 - alpha_cs) * prob - alpha_cs * penalty;
}

}  // namespace ips
