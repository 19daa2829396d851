// Copyright (C) 2026 The IPS Decoding Authors
// SPDX-License-Identifier: Apache-2.0

#include "ips/server.hpp"

#include <httplib.h>

namespace ips {

namespace {

void reply_json(httplib::Response& res, const nlohmann::json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

template <typename Handler>
void guarded(httplib::Response& res, Handler&& handler) {
  try {
    handler();
  } catch (const nlohmann::json::exception& e) {
    reply_json(res, {{"error", e.what()}}, 400);
  } catch (const Error& e) {
    reply_json(res, {{"error", e.what()}}, 400);
  }
}

}  // namespace

struct BackendServer::Impl {
  BackendPtr backend;
  httplib::Server server;
};

BackendServer::BackendServer(BackendPtr backend) : impl_(std::make_unique<Impl>()) {
  impl_->backend = std::move(backend);
  const Backend& model = *impl_->backend;
  auto& srv = impl_->server;

  srv.Get("/info", [&model](const httplib::Request&, httplib::Response& res) {
    reply_json(res, info_to_json(model.info()));
  });

  srv.Post("/forward", [&model](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = nlohmann::json::parse(req.body);
      const auto tokens = body.at("tokens").get<TokenSequence>();
      const std::string mode = body.value("return_hidden", "last");
      if (mode != "last" && mode != "all") {
        throw ArgumentError("return_hidden must be 'last' or 'all'");
      }
      const StepOutput out = model.forward(tokens, mode == "all");
      nlohmann::json j = {{"probs", vector_to_json(out.probs)},
                          {"hidden_last", vector_to_json(out.hidden_last)}};
      if (out.hidden_all) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& h : *out.hidden_all) {
          rows.push_back(vector_to_json(h));
        }
        j["hidden_all"] = std::move(rows);
      }
      reply_json(res, j);
    });
  });

  srv.Post("/forward_batch", [&model](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = nlohmann::json::parse(req.body);
      const auto prefix = body.at("prefix").get<TokenSequence>();
      const auto candidates = body.at("candidates").get<TokenSequence>();
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& h : model.forward_candidates(prefix, candidates)) {
        rows.push_back(vector_to_json(h));
      }
      reply_json(res, {{"hidden", std::move(rows)}});
    });
  });
}

BackendServer::~BackendServer() { stop(); }

int BackendServer::bind_any_port(const std::string& host) {
  return impl_->server.bind_to_any_port(host);
}

bool BackendServer::bind(const std::string& host, int port) {
  return impl_->server.bind_to_port(host, port);
}

void BackendServer::serve() { impl_->server.listen_after_bind(); }

void BackendServer::stop() {
  if (impl_) {
    impl_->server.stop();
  }
}

void BackendServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace ips
