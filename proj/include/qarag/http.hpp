#pragma once

#include <chrono>
#include <string>
#include <string_view>

#include "json.hpp"

namespace qarag::http {

struct Url {
  std::string scheme_host_port;  // "http://host:port"
  std::string path;              // "/v1/embeddings"
};

// Only plain http:// URLs are supported.
Url parse_url(std::string_view url);

struct RetryPolicy {
  int max_retries = 2;
  std::chrono::milliseconds initial_backoff{200};
  double backoff_factor = 2.0;
};

// POSTs a JSON body and parses the JSON response. Non-2xx statuses and transport failures are
// retried per the policy, then surface as RetryableError carrying the endpoint and last status.
nlohmann::json post_json(std::string_view url, const nlohmann::json& body,
                         std::chrono::milliseconds timeout, const RetryPolicy& retry = {});

// True when anything answers HTTP at the endpoint's host within the timeout.
bool reachable(std::string_view url, std::chrono::milliseconds timeout) noexcept;

}  // namespace qarag::http
