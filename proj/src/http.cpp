/*
 * Copyright 2026 The DDS Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "http.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include "httplib.h"

namespace dds {

struct HttpServer::Impl {
  Service& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(Service& s) : service(s) {}
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    ApiRequest api;
    api.method = req.method;
    api.path = req.path;
    for (const auto& [k, v] : req.params) api.query.emplace(k, v);
    for (const auto& [k, v] : req.headers) {
      std::string key = k;
      std::transform(key.begin(), key.end(), key.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      api.headers.emplace(std::move(key), v);
    }
    api.body = req.body;
    const ApiResponse out = impl_->service.handle(api);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  impl_->server.Get(".*", handler);
  impl_->server.Post(".*", handler);
  impl_->server.Put(".*", handler);
  impl_->server.Delete(".*", handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  int bound = -1;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (impl_->server.bind_to_port(host, port)) {
    bound = port;
  }
  if (bound <= 0) throw Error(ErrorCode::kInvalidArgument, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::start() {
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void HttpServer::serve() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string url_encode_path(std::string_view path) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : path) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~' || c == '/') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 15];
    }
  }
  return out;
}

struct HttpClient::Impl {
  std::unique_ptr<httplib::Client> client;
  std::string token;
};

HttpClient::HttpClient(const std::string& base_url, std::string token)
    : impl_(std::make_unique<Impl>()) {
  static const std::regex url_re(R"(^http://[A-Za-z0-9.\-]+(:[0-9]{1,5})?/?$)");
  if (!std::regex_match(base_url, url_re)) {
    throw Error(ErrorCode::kInvalidArgument, "malformed server url '" + base_url + "'");
  }
  std::string url = base_url;
  if (url.back() == '/') url.pop_back();
  impl_->client = std::make_unique<httplib::Client>(url);
  impl_->client->set_url_encode(false);
  impl_->client->set_connection_timeout(5);
  impl_->client->set_read_timeout(30);
  impl_->token = std::move(token);
}

HttpClient::~HttpClient() = default;

HttpResult HttpClient::request(const std::string& method, const std::string& path,
                               const std::string& body, const std::string& idempotency_key) {
  httplib::Headers headers;
  if (!impl_->token.empty()) headers.emplace("Authorization", "Bearer " + impl_->token);
  if (!idempotency_key.empty()) headers.emplace("Idempotency-Key", idempotency_key);
  httplib::Result res;
  if (method == "GET") {
    res = impl_->client->Get(path, headers);
  } else if (method == "POST") {
    res = impl_->client->Post(path, headers, body, "application/json");
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unsupported method " + method);
  }
  if (!res) {
    throw Error(ErrorCode::kBackendUnavailable, "request failed: " + httplib::to_string(res.error()));
  }
  return {res->status, res->body};
}

}  // namespace dds
