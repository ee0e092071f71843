// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#include "edgepier/net/http.hpp"

#include <algorithm>
#include <cstring>
#include <mutex>
#include <sstream>

namespace edgepier::net {

namespace {

constexpr std::size_t kMaxHead = 16 * 1024;
constexpr std::size_t kMaxBody = std::size_t{2} * 1024 * 1024 * 1024;
constexpr std::size_t kIoChunk = 256 * 1024;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

}  // namespace

const char* http_reason(int status) {
  switch (status) {
    case 200: return "OK";
    case 201: return "Created";
    case 202: return "Accepted";
    case 400: return "Bad Request";
    case 404: return "Not Found";
    case 405: return "Method Not Allowed";
    case 500: return "Internal Server Error";
    case 503: return "Service Unavailable";
    case 507: return "Insufficient Storage";
    default: return "Unknown";
  }
}

std::optional<std::string> HttpRequest::query_param(const std::string& key) const {
  auto q = target.find('?');
  if (q == std::string::npos) return std::nullopt;
  std::istringstream qs(target.substr(q + 1));
  std::string pair;
  while (std::getline(qs, pair, '&')) {
    auto eq = pair.find('=');
    if (eq == std::string::npos) continue;
    if (pair.substr(0, eq) == key) return pair.substr(eq + 1);
  }
  return std::nullopt;
}

std::optional<std::string> HttpRequest::header(const std::string& key) const {
  auto it = headers.find(lower(key));
  if (it == headers.end()) return std::nullopt;
  return it->second;
}

void HttpResponse::set_header(const std::string& key, const std::string& value) {
  headers.emplace_back(key, value);
}

void HttpResponse::set_body(std::string_view text, const std::string& content_type) {
  body.assign(text.begin(), text.end());
  set_header("Content-Type", content_type);
}

HttpResponse HttpResponse::json(int status, std::string_view text) {
  HttpResponse r;
  r.status = status;
  r.set_body(text, "application/json");
  return r;
}

// Reads until the blank line; bytes past it land in `leftover`. false on EOF
// at a message boundary.
bool read_http_head(Channel& ch, std::string& head, std::vector<std::uint8_t>& leftover) {
  head.clear();
  std::vector<std::uint8_t> buf(std::move(leftover));
  leftover.clear();
  for (;;) {
    // scan for CRLFCRLF
    if (buf.size() >= 4) {
      for (std::size_t i = 0; i + 3 < buf.size(); ++i) {
        if (buf[i] == '\r' && buf[i + 1] == '\n' && buf[i + 2] == '\r' && buf[i + 3] == '\n') {
          head.assign(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(i));
          leftover.assign(buf.begin() + static_cast<std::ptrdiff_t>(i + 4), buf.end());
          return true;
        }
      }
    }
    if (buf.size() > kMaxHead) throw HttpError("http head too large");
    std::uint8_t chunk[4096];
    auto n = ch.read_some(chunk, std::nullopt);
    if (!n) throw HttpError("http head timeout");
    if (*n == 0) {
      if (buf.empty()) return false;
      throw HttpError("eof inside http head");
    }
    buf.insert(buf.end(), chunk, chunk + *n);
  }
}

namespace {

void read_body(Channel& ch, std::vector<std::uint8_t>& leftover, std::size_t length,
               std::vector<std::uint8_t>& out) {
  if (length > kMaxBody) throw HttpError("body too large");
  out.clear();
  out.reserve(std::min(length, std::size_t{1} << 20));
  std::size_t take = std::min(length, leftover.size());
  out.insert(out.end(), leftover.begin(), leftover.begin() + static_cast<std::ptrdiff_t>(take));
  leftover.erase(leftover.begin(), leftover.begin() + static_cast<std::ptrdiff_t>(take));
  std::vector<std::uint8_t> chunk(kIoChunk);
  while (out.size() < length) {
    auto want = std::min(chunk.size(), length - out.size());
    auto n = ch.read_some(std::span(chunk.data(), want), std::nullopt);
    if (!n || *n == 0) throw HttpError("eof inside body");
    out.insert(out.end(), chunk.begin(), chunk.begin() + static_cast<std::ptrdiff_t>(*n));
  }
}

std::map<std::string, std::string> parse_headers(std::istringstream& in) {
  std::map<std::string, std::string> headers;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    auto colon = line.find(':');
    if (colon == std::string::npos) throw HttpError("malformed header line");
    headers[lower(trim(line.substr(0, colon)))] = trim(line.substr(colon + 1));
  }
  return headers;
}

}  // namespace

// ---------------------------------------------------------------------------
// server
// ---------------------------------------------------------------------------

HttpServer::HttpServer(NetHost& host, std::string listen_address, HttpHandler handler)
    : host_(host), address_(std::move(listen_address)), handler_(std::move(handler)) {}

HttpServer::~HttpServer() {
  try {
    stop();
  } catch (...) {
  }
}

void HttpServer::start() {
  if (running_) return;
  running_ = true;
  listener_ = host_.listen(address_);
  host_.spawn("http-accept:" + address_, [this] {
    try {
      for (;;) {
        std::shared_ptr<Channel> ch = listener_->accept();
        {
          std::lock_guard lk(conns_mu_);
          conns_[ch.get()] = ch;
        }
        host_.spawn("http-serve", [this, ch] {
          serve(ch);
          std::lock_guard lk(conns_mu_);
          conns_.erase(ch.get());
        });
      }
    } catch (const ChannelClosed&) {
    } catch (const TaskCanceled&) {
    }
  });
}

void HttpServer::stop() {
  if (!running_) return;
  running_ = false;
  if (listener_) listener_->close();
  std::vector<std::shared_ptr<Channel>> open;
  {
    std::lock_guard lk(conns_mu_);
    for (auto& [_, weak] : conns_)
      if (auto ch = weak.lock()) open.push_back(ch);
  }
  for (auto& ch : open) {
    try {
      ch->close();
    } catch (...) {
    }
  }
}

void HttpServer::serve(std::shared_ptr<Channel> ch) {
  std::vector<std::uint8_t> leftover;
  try {
    for (;;) {
      std::string head;
      if (!read_http_head(*ch, head, leftover)) return;  // clean close
      std::istringstream in(head);
      std::string request_line;
      std::getline(in, request_line);
      request_line = trim(request_line);
      std::istringstream rl(request_line);
      HttpRequest req;
      std::string version;
      rl >> req.method >> req.target >> version;
      if (req.method.empty() || req.target.empty()) throw HttpError("bad request line");
      req.headers = parse_headers(in);
      if (auto cl = req.header("content-length")) {
        read_body(*ch, leftover, static_cast<std::size_t>(std::stoull(*cl)), req.body);
      }
      bool close_conn = false;
      if (auto conn = req.header("connection"); conn && lower(*conn) == "close")
        close_conn = true;

      HttpResponse resp;
      try {
        resp = handler_(req);
      } catch (const std::exception& e) {
        resp = HttpResponse::json(
            500, std::string("{\"errors\":[{\"code\":\"UNSUPPORTED\",\"message\":\"") + e.what() +
                     "\"}]}");
      }

      std::uint64_t length = resp.body_writer ? resp.content_length : resp.body.size();
      std::ostringstream hs;
      hs << "HTTP/1.1 " << resp.status << ' ' << http_reason(resp.status) << "\r\n";
      bool have_type = false;
      for (const auto& [k, v] : resp.headers) {
        hs << k << ": " << v << "\r\n";
        if (lower(k) == "content-type") have_type = true;
      }
      if (!have_type) hs << "Content-Type: application/octet-stream\r\n";
      hs << "Content-Length: " << length << "\r\n";
      hs << "Connection: " << (close_conn ? "close" : "keep-alive") << "\r\n\r\n";
      auto header_text = hs.str();
      ch->write(std::span(reinterpret_cast<const std::uint8_t*>(header_text.data()),
                          header_text.size()));
      if (req.method != "HEAD") {
        if (resp.body_writer)
          resp.body_writer(*ch);
        else if (!resp.body.empty())
          ch->write(resp.body);
      }
      if (close_conn) {
        ch->close();
        return;
      }
    }
  } catch (const TaskCanceled&) {
  } catch (const std::exception&) {
    try {
      ch->close();  // abort mid-stream: the client sees a reset/short body
    } catch (...) {
    }
  }
}

// ---------------------------------------------------------------------------
// client
// ---------------------------------------------------------------------------

HttpClient::HttpClient(NetHost& host, std::string server_address)
    : host_(host), address_(std::move(server_address)) {}

void HttpClient::close() {
  if (channel_) {
    try {
      channel_->close();
    } catch (...) {
    }
    channel_.reset();
  }
}

HttpClient::Result HttpClient::request(
    const std::string& method, const std::string& target,
    const std::vector<std::pair<std::string, std::string>>& headers,
    std::span<const std::uint8_t> body,
    const std::function<void(std::span<const std::uint8_t>)>& sink) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    bool started = false;
    try {
      if (!channel_) channel_ = host_.connect(address_);
      std::ostringstream hs;
      hs << method << ' ' << target << " HTTP/1.1\r\nHost: " << address_ << "\r\n";
      for (const auto& [k, v] : headers) hs << k << ": " << v << "\r\n";
      if (!body.empty() || method == "PUT" || method == "POST")
        hs << "Content-Length: " << body.size() << "\r\n";
      hs << "\r\n";
      auto text = hs.str();
      channel_->write(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
      if (!body.empty()) channel_->write(body);

      std::string head;
      std::vector<std::uint8_t> leftover;
      if (!read_http_head(*channel_, head, leftover)) throw ChannelClosed("server closed");
      started = true;

      Result res;
      std::istringstream in(head);
      std::string status_line;
      std::getline(in, status_line);
      status_line = trim(status_line);
      std::istringstream sl(status_line);
      std::string version, reason;
      sl >> version >> res.status;
      res.headers = parse_headers(in);

      std::uint64_t length = 0;
      if (auto it = res.headers.find("content-length"); it != res.headers.end())
        length = std::stoull(it->second);
      if (method == "HEAD") length = 0;

      std::uint64_t got = 0;
      auto feed = [&](std::span<const std::uint8_t> piece) {
        if (sink)
          sink(piece);
        else
          res.body.insert(res.body.end(), piece.begin(), piece.end());
        got += piece.size();
      };
      if (!leftover.empty()) {
        auto take = std::min<std::uint64_t>(length, leftover.size());
        feed(std::span(leftover.data(), static_cast<std::size_t>(take)));
      }
      std::vector<std::uint8_t> chunk(kIoChunk);
      while (got < length) {
        auto want = std::min<std::uint64_t>(chunk.size(), length - got);
        auto n = channel_->read_some(std::span(chunk.data(), static_cast<std::size_t>(want)),
                                     std::nullopt);
        if (!n || *n == 0) throw ChannelClosed("eof inside response body");
        feed(std::span(chunk.data(), *n));
      }
      res.body_length = got;
      if (auto it = res.headers.find("connection");
          it != res.headers.end() && lower(it->second) == "close")
        close();
      return res;
    } catch (const ChannelClosed&) {
      close();
      // retry only a stale keep-alive connection, never a half-read response
      if (attempt == 1 || started) throw;
    }
  }
  throw ChannelClosed("unreachable");
}

}  // namespace edgepier::net
