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

// HTTP/1.1 front end for Service, and the matching client.

#ifndef DDS_SRC_HTTP_HPP_
#define DDS_SRC_HTTP_HPP_

#include <memory>
#include <string>
#include <thread>

#include "service.hpp"

namespace dds {

class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();

  // Port 0 picks a free port. Returns the bound port; throws
  // Error(kInvalidArgument) when binding fails.
  int bind(const std::string& host, int port);
  // Serves on a background thread.
  void start();
  // Serves on the calling thread until stop().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct HttpResult {
  int status = 0;
  std::string body;
};

class HttpClient {
 public:
  // base_url: http://host[:port]. Throws Error(kInvalidArgument).
  HttpClient(const std::string& base_url, std::string token);
  ~HttpClient();

  // Throws Error(kBackendUnavailable) when the server cannot be reached.
  HttpResult request(const std::string& method, const std::string& path,
                     const std::string& body = {}, const std::string& idempotency_key = {});

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Percent-encodes everything outside the unreserved set and '/'.
std::string url_encode_path(std::string_view path);

}  // namespace dds

#endif  // DDS_SRC_HTTP_HPP_
