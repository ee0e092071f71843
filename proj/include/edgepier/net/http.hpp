// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "edgepier/net/fabric.hpp"

namespace edgepier::net {

// Minimal HTTP/1.1 over the Channel abstraction: request line + headers +
// Content-Length bodies, keep-alive, no chunked encoding. Enough for the
// registry V2 pull/push subset and for stock clients that speak plain 1.1.

struct HttpRequest {
  std::string method;
  std::string target;  // path incl. query
  std::map<std::string, std::string> headers;  // keys lowercased
  std::vector<std::uint8_t> body;

  std::string path() const {
    auto q = target.find('?');
    return q == std::string::npos ? target : target.substr(0, q);
  }
  std::optional<std::string> query_param(const std::string& key) const;
  std::optional<std::string> header(const std::string& key) const;
};

struct HttpResponse {
  int status = 200;
  std::vector<std::pair<std::string, std::string>> headers;
  std::vector<std::uint8_t> body;
  // Streaming body: when set, content_length governs the Content-Length
  // header and `body` is ignored. The writer sends exactly that many bytes.
  std::function<void(Channel&)> body_writer;
  std::uint64_t content_length = 0;

  void set_header(const std::string& key, const std::string& value);
  void set_body(std::string_view text, const std::string& content_type);
  static HttpResponse json(int status, std::string_view body);
};

class HttpError : public std::runtime_error {
 public:
  explicit HttpError(const std::string& what) : std::runtime_error(what) {}
};

using HttpHandler = std::function<HttpResponse(const HttpRequest&)>;

// Serves keep-alive connections on one listener; one task per connection.
class HttpServer {
 public:
  HttpServer(NetHost& host, std::string listen_address, HttpHandler handler);
  ~HttpServer();

  void start();
  void stop();
  const std::string& address() const { return address_; }

 private:
  void serve(std::shared_ptr<Channel> ch);

  NetHost& host_;
  std::string address_;
  HttpHandler handler_;
  std::unique_ptr<Listener> listener_;
  std::mutex conns_mu_;
  std::map<Channel*, std::weak_ptr<Channel>> conns_;
  bool running_ = false;
};

// Keep-alive client; reconnects transparently between requests.
class HttpClient {
 public:
  HttpClient(NetHost& host, std::string server_address);

  struct Result {
    int status = 0;
    std::map<std::string, std::string> headers;
    std::vector<std::uint8_t> body;
    std::uint64_t body_length = 0;  // bytes received (also with a sink)
  };

  // sink, when set, receives body bytes instead of buffering them.
  Result request(const std::string& method, const std::string& target,
                 const std::vector<std::pair<std::string, std::string>>& headers = {},
                 std::span<const std::uint8_t> body = {},
                 const std::function<void(std::span<const std::uint8_t>)>& sink = nullptr);

  void close();

 private:
  NetHost& host_;
  std::string address_;
  std::unique_ptr<Channel> channel_;
};

// shared parsing plumbing
bool read_http_head(Channel& ch, std::string& head, std::vector<std::uint8_t>& leftover);
const char* http_reason(int status);

}  // namespace edgepier::net
