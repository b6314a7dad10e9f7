#include "qarag/http.hpp"

#include <thread>

#include "httplib.h"
#include "qarag/errors.hpp"

namespace qarag::http {

Url parse_url(std::string_view url) {
  constexpr std::string_view kScheme = "http://";
  if (!url.starts_with(kScheme)) {
    throw ConfigError("unsupported endpoint URL (expected http://...): " + std::string(url));
  }
  const std::size_t slash = url.find('/', kScheme.size());
  Url out;
  out.scheme_host_port = std::string(url.substr(0, slash));
  out.path = slash == std::string_view::npos ? "/" : std::string(url.substr(slash));
  if (out.scheme_host_port.size() == kScheme.size()) {
    throw ConfigError("endpoint URL has no host: " + std::string(url));
  }
  return out;
}

namespace {

void set_timeouts(httplib::Client& client, std::chrono::milliseconds timeout) {
  const auto sec = static_cast<time_t>(timeout.count() / 1000);
  const auto usec = static_cast<time_t>((timeout.count() % 1000) * 1000);
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);
}

}  // namespace

nlohmann::json post_json(std::string_view url, const nlohmann::json& body,
                         std::chrono::milliseconds timeout, const RetryPolicy& retry) {
  const Url target = parse_url(url);
  httplib::Client client(target.scheme_host_port);
  set_timeouts(client, timeout);
  const std::string payload = body.dump();

  auto backoff = retry.initial_backoff;
  int status = 0;
  std::string reason;
  for (int attempt = 0; attempt <= retry.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(backoff.count()) * retry.backoff_factor));
    }
    auto res = client.Post(target.path, payload, "application/json");
    if (!res) {
      status = 0;
      reason = httplib::to_string(res.error());
      continue;
    }
    status = res->status;
    if (status < 200 || status >= 300) {
      reason = "HTTP " + std::to_string(status);
      continue;
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      // A malformed body will not improve on retry.
      throw RetryableError(std::string("undecodable response from ") + std::string(url) + ": " +
                               e.what(),
                           std::string(url), status);
    }
  }
  throw RetryableError("request to " + std::string(url) + " failed after " +
                           std::to_string(retry.max_retries + 1) + " attempt(s): " + reason,
                       std::string(url), status);
}

bool reachable(std::string_view url, std::chrono::milliseconds timeout) noexcept {
  try {
    const Url target = parse_url(url);
    httplib::Client client(target.scheme_host_port);
    set_timeouts(client, timeout);
    auto res = client.Get("/");
    return static_cast<bool>(res);
  } catch (...) {
    return false;
  }
}

}  // namespace qarag::http
