#pragma once

// Minimal blocking HTTP POST with retries, shared by the external providers.

#include <httplib.h>
// <resolv.h> defines _res, which clashes with Eigen parameter names.
#ifdef _res
#undef _res
#endif

#include <chrono>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "crossrecipe/error.hpp"

namespace crossrecipe {

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds backoff{200};  // doubled after each failure
  std::chrono::milliseconds timeout{60000};
};

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

/// Splits "http://host:port/path" into origin and path ("/" when absent).
inline Url split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::InvalidConfig, "URL without scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

using HeaderList = std::vector<std::pair<std::string, std::string>>;

/// POSTs body and returns the response body. 4xx responses are not retried
/// (HttpError); transport failures and 5xx are retried, then reported as
/// Timeout or HttpError.
inline std::string http_post(const std::string& url, const std::string& body,
                             const std::string& content_type, const HeaderList& headers = {},
                             const RetryPolicy& policy = {}) {
  const Url u = split_url(url);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto delay = policy.backoff;
  ErrorCode last = ErrorCode::HttpError;
  std::string detail;
  for (int attempt = 0; attempt < std::max(1, policy.attempts); ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    httplib::Client client(u.origin);
    client.set_connection_timeout(policy.timeout);
    client.set_read_timeout(policy.timeout);
    client.set_write_timeout(policy.timeout);
    auto res = client.Post(u.path, h, body, content_type);
    if (!res) {
      const auto err = res.error();
      last = err == httplib::Error::Read || err == httplib::Error::Write ||
                     err == httplib::Error::ConnectionTimeout
                 ? ErrorCode::Timeout
                 : ErrorCode::HttpError;
      detail = httplib::to_string(err);
      continue;
    }
    if (res->status >= 200 && res->status < 300) return res->body;
    last = ErrorCode::HttpError;
    detail = "status " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
    if (res->status >= 400 && res->status < 500 && res->status != 429) break;
  }
  throw Error(last, url + ": " + detail);
}

}  // namespace crossrecipe
