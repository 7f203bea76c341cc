#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "nsp/common.hpp"
#include "nsp/sentiment.hpp"

namespace nsp::scorer {

namespace {

using nlohmann::json;

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError(fmt::format("endpoint URL '{}' has no scheme", url));
  }
  std::size_t path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos || path_start + 1 == url.size()) {
    throw ValidationError(fmt::format("endpoint URL '{}' has no request path", url));
  }
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string extract_content(const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    throw BackendError(fmt::format("completion response is not JSON: {}", e.what()));
  }
  if (!doc.contains("choices") || !doc.at("choices").is_array() || doc.at("choices").empty()) {
    throw BackendError("completion response has no choices");
  }
  const json& first = doc.at("choices").at(0);
  if (!first.contains("message") || !first.at("message").contains("content") ||
      !first.at("message").at("content").is_string()) {
    throw BackendError("completion response choice has no message content");
  }
  return first.at("message").at("content").get<std::string>();
}

}  // namespace

struct HttpChatBackend::Impl {
  HttpBackendConfig config;
  SplitUrl url;
  TokenBucket bucket;
  httplib::Client client;
  std::mutex mutex;  // httplib clients are not thread-safe

  explicit Impl(HttpBackendConfig cfg)
      : config(std::move(cfg)),
        url(split_url(config.endpoint_url)),
        bucket(config.requests_per_second, std::max(config.burst, 1.0)),
        client(url.base) {
    client.set_connection_timeout(config.timeout_seconds);
    client.set_read_timeout(config.timeout_seconds);
    client.set_write_timeout(config.timeout_seconds);
  }
};

HttpChatBackend::HttpChatBackend(HttpBackendConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {
  if (impl_->config.max_retries < 0) {
    throw ValidationError("max_retries must be non-negative");
  }
}

HttpChatBackend::~HttpChatBackend() = default;

std::string HttpChatBackend::complete(const std::string& prompt, const std::string& model_id,
                                      double temperature) {
  json payload;
  payload["model"] = model_id;
  payload["temperature"] = temperature;
  payload["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
  std::string body = payload.dump();

  httplib::Headers headers;
  if (!impl_->config.api_key.empty()) {
    headers.emplace("Authorization", fmt::format("Bearer {}", impl_->config.api_key));
  }

  std::string last_error;
  for (int attempt = 0; attempt <= impl_->config.max_retries; ++attempt) {
    if (attempt > 0) {
      auto backoff =
          std::chrono::milliseconds(impl_->config.initial_backoff_ms) * (1 << (attempt - 1));
      std::this_thread::sleep_for(backoff);
    }
    impl_->bucket.acquire();

    httplib::Result res = [&] {
      std::lock_guard lock(impl_->mutex);
      return impl_->client.Post(impl_->url.path, headers, body, "application/json");
    }();

    if (!res) {
      last_error = fmt::format("transport error: {}", httplib::to_string(res.error()));
      continue;
    }
    if (res->status == 200) {
      return extract_content(res->body);
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = fmt::format("HTTP {}", res->status);
      continue;
    }
    throw BackendError(fmt::format("HTTP {} from {}: {}", res->status,
                                   impl_->config.endpoint_url,
                                   res->body.substr(0, 200)));
  }
  throw BackendError(fmt::format("giving up on {} after {} attempts: {}",
                                 impl_->config.endpoint_url, impl_->config.max_retries + 1,
                                 last_error));
}

}  // namespace nsp::scorer
