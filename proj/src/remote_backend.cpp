// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

// Eigen must come before httplib: <resolv.h> defines a `_res` macro.
#include "ips/backend.hpp"

#include <httplib.h>

#include <chrono>
#include <fmt/core.h>

namespace ips {

namespace {

struct Endpoint {
  std::string scheme_host_port;
  std::string base_path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ArgumentError(fmt::format("endpoint '{}' needs an http:// scheme", url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  if (path_start == std::string::npos) {
    ep.scheme_host_port = url;
  } else {
    ep.scheme_host_port = url.substr(0, path_start);
    ep.base_path = url.substr(path_start);
    while (!ep.base_path.empty() && ep.base_path.back() == '/') {
      ep.base_path.pop_back();
    }
  }
  return ep;
}

HiddenList matrix_from_json(const nlohmann::json& j, const char* field) {
  if (!j.is_array()) {
    throw ProtocolError(fmt::format("'{}' must be an array of arrays", field));
  }
  HiddenList rows;
  rows.reserve(j.size());
  for (const auto& row : j) {
    rows.push_back(vector_from_json(row, field));
  }
  return rows;
}

}  // namespace

struct RemoteBackend::Connection {
  Connection(const Endpoint& ep, double timeout_s)
      : client(ep.scheme_host_port), base_path(ep.base_path), timeout_s(timeout_s) {
    const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(timeout_s));
    const auto sec = usec.count() / 1000000;
    const auto rem = usec.count() % 1000000;
    client.set_connection_timeout(sec, rem);
    client.set_read_timeout(sec, rem);
    client.set_write_timeout(sec, rem);
    client.set_keep_alive(true);
  }

  httplib::Client client;
  std::string base_path;
  double timeout_s;
};

RemoteBackend::RemoteBackend(const std::string& endpoint_url, double timeout_s) {
  if (!(timeout_s > 0.0)) {
    throw ArgumentError("remote timeout must be positive");
  }
  conn_ = std::make_unique<Connection>(split_url(endpoint_url), timeout_s);
  if (!conn_->client.is_valid()) {
    throw ArgumentError(fmt::format("unsupported endpoint '{}'", endpoint_url));
  }
  info_ = info_from_json(request("GET", "/info", nullptr));
  try {
    info_.validate();
  } catch (const ValidationError& e) {
    throw ProtocolError(e.what());
  }
}

RemoteBackend::~RemoteBackend() = default;

nlohmann::json RemoteBackend::request(const std::string& method, const std::string& path,
                                      const nlohmann::json* body) const {
  const std::string full_path = conn_->base_path + path;
  const auto start = std::chrono::steady_clock::now();
  httplib::Result res;
  {
    std::lock_guard lock(mutex_);
    if (method == "GET") {
      res = conn_->client.Get(full_path);
    } else {
      res = conn_->client.Post(full_path, body->dump(), "application/json");
    }
  }
  if (!res) {
    const double waited =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout ||
        ((err == httplib::Error::Read || err == httplib::Error::Write) &&
         waited >= 0.9 * conn_->timeout_s)) {
      throw TimeoutError(fmt::format("{} {} timed out after {:.3f}s", method, full_path, waited));
    }
    throw ProtocolError(
        fmt::format("{} {} failed: {}", method, full_path, httplib::to_string(err)));
  }
  if (res->status != 200) {
    throw ProtocolError(fmt::format("{} {} returned HTTP {}", method, full_path, res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(fmt::format("{} {} returned invalid JSON: {}", method, full_path, e.what()));
  }
}

StepOutput RemoteBackend::do_forward(std::span<const TokenId> prefix, bool want_all_hidden) const {
  const nlohmann::json body = {{"tokens", TokenSequence(prefix.begin(), prefix.end())},
                               {"return_hidden", want_all_hidden ? "all" : "last"}};
  const nlohmann::json j = request("POST", "/forward", &body);
  if (!j.is_object()) {
    throw ProtocolError("/forward response must be a JSON object");
  }
  StepOutput out;
  if (j.contains("probs")) {
    out.probs = vector_from_json(j["probs"], "probs");
  } else if (j.contains("logits")) {
    const HiddenVector logits = vector_from_json(j["logits"], "logits");
    if (logits.size() == 0 || !logits.allFinite()) {
      throw ProtocolError("'logits' must be a non-empty array of finite numbers");
    }
    out.probs = softmax(logits);
  } else {
    throw ProtocolError("/forward response has neither 'probs' nor 'logits'");
  }
  if (!j.contains("hidden_last")) {
    throw ProtocolError("/forward response is missing 'hidden_last'");
  }
  out.hidden_last = vector_from_json(j["hidden_last"], "hidden_last");
  if (want_all_hidden) {
    if (!j.contains("hidden_all")) {
      throw ProtocolError("/forward response is missing 'hidden_all'");
    }
    out.hidden_all = matrix_from_json(j["hidden_all"], "hidden_all");
  }
  if (auto err = check_step_output(out, info_, prefix.size())) {
    throw ProtocolError(fmt::format("/forward response invalid: {}", *err));
  }
  return out;
}

HiddenList RemoteBackend::do_forward_candidates(std::span<const TokenId> prefix,
                                                std::span<const TokenId> candidates) const {
  const nlohmann::json body = {{"prefix", TokenSequence(prefix.begin(), prefix.end())},
                               {"candidates", TokenSequence(candidates.begin(), candidates.end())}};
  const nlohmann::json j = request("POST", "/forward_batch", &body);
  if (!j.is_object() || !j.contains("hidden")) {
    throw ProtocolError("/forward_batch response is missing 'hidden'");
  }
  HiddenList hidden = matrix_from_json(j["hidden"], "hidden");
  if (hidden.size() != candidates.size()) {
    throw ProtocolError(fmt::format("/forward_batch returned {} rows for {} candidates",
                                    hidden.size(), candidates.size()));
  }
  for (const auto& h : hidden) {
    if (h.size() != info_.hidden_dim || !h.allFinite()) {
      throw ProtocolError("/forward_batch row has the wrong size or non-finite values");
    }
  }
  return hidden;
}

}  // namespace ips
