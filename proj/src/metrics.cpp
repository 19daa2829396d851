// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

#include "ips/metrics.hpp"

#include <fmt/core.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <istream>
#include <set>
#include <sstream>

#include "ips/scoring.hpp"

namespace ips {

double distinct_n(const std::vector<TokenSequence>& responses, int n) {
  if (n < 1) {
    throw RangeError("n", fmt::format("{} < 1", n));
  }
  std::set<TokenSequence> unique;
  std::size_t total = 0;
  const auto width = static_cast<std::size_t>(n);
  for (const auto& r : responses) {
    if (r.size() < width) {
      continue;
    }
    for (std::size_t i = 0; i + width <= r.size(); ++i) {
      unique.emplace(r.begin() + static_cast<std::ptrdiff_t>(i),
                     r.begin() + static_cast<std::ptrdiff_t>(i + width));
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(unique.size()) / static_cast<double>(total);
}

TokenSequence strip_token(const TokenSequence& tokens, TokenId eou) {
  TokenSequence out;
  std::copy_if(tokens.begin(), tokens.end(), std::back_inserter(out),
               [eou](TokenId t) { return t != eou; });
  return out;
}

Matrix<double> similarity_heatmap(const HiddenList& hiddens) {
  if (hiddens.empty()) {
    throw ArgumentError("heatmap of zero vectors");
  }
  const auto n = static_cast<Eigen::Index>(hiddens.size());
  Matrix<double> m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = cosine(hiddens[i], hiddens[i]);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      m(i, j) = cosine(hiddens[i], hiddens[j]);
      m(j, i) = m(i, j);
    }
  }
  return m;
}

Diagnostics diagnostics(const GenerationResult& result, const HiddenList& hiddens,
                        const HiddenList& utterance_reps) {
  if (result.tokens.empty() || hiddens.empty()) {
    throw ArgumentError("diagnostics of an empty response");
  }
  Diagnostics d;
  if (hiddens.size() > 1) {
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < hiddens.size(); ++i) {
      for (std::size_t j = i + 1; j < hiddens.size(); ++j) {
        sum += cosine(hiddens[i], hiddens[j]);
        ++pairs;
      }
    }
    d.mean_intra_response_cosine = sum / static_cast<double>(pairs);
  }
  if (!utterance_reps.empty()) {
    d.mean_context_cosine =
        isotropic_value(response_representation(hiddens), std::span<const HiddenVector>(utterance_reps));
  }
  for (const auto& step : result.per_step) {
    d.per_step_trace.push_back({step.p_value, step.i_value, step.score});
  }
  return d;
}

void write_heatmap_csv(std::ostream& out, const std::vector<std::string>& labels,
                       const Matrix<double>& matrix) {
  if (static_cast<Eigen::Index>(labels.size()) != matrix.rows() || matrix.rows() != matrix.cols()) {
    throw DimensionError("heatmap labels do not match the matrix");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    fmt::print(out, "{}{}", i == 0 ? "" : ",", labels[i]);
  }
  out << '\n';
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    out << labels[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
      fmt::print(out, ",{:.6f}", matrix(r, c));
    }
    out << '\n';
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == ',') {
    fields.emplace_back();
  }
  return fields;
}

}  // namespace

HeatmapCsv read_heatmap_csv(std::istream& in) {
  HeatmapCsv csv;
  std::string line;
  if (!std::getline(in, line)) {
    throw ArgumentError("heatmap CSV is empty");
  }
  csv.labels = split_csv(line);
  const auto n = static_cast<Eigen::Index>(csv.labels.size());
  csv.matrix.resize(n, n);
  Eigen::Index row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    const auto fields = split_csv(line);
    if (row >= n || static_cast<Eigen::Index>(fields.size()) != n + 1) {
      throw ArgumentError(fmt::format("heatmap CSV row {} has the wrong shape", row + 1));
    }
    for (Eigen::Index c = 0; c < n; ++c) {
      csv.matrix(row, c) = std::stod(fields[static_cast<std::size_t>(c + 1)]);
    }
    ++row;
  }
  if (row != n) {
    throw ArgumentError(fmt::format("heatmap CSV has {} rows, expected {}", row, n));
  }
  return csv;
}

}  // namespace ips
