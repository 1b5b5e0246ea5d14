// Copyright 2026 The fivelm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <future>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>

#include "fivelm/augmentation.hpp"
#include "fivelm/embedding.hpp"
#include "fivelm/errors.hpp"

namespace fivelm {

namespace detail {

struct SplitUrl {
  std::string base;
  std::string path;
};

inline SplitUrl split_url(const std::string& endpoint) {
  const auto scheme = endpoint.find("://");
  if (scheme == std::string::npos) {
    throw Error("endpoint must include a scheme: " + endpoint);
  }
  const auto path_start = endpoint.find('/', scheme + 3);
  if (path_start == std::string::npos) {
    return {endpoint, "/"};
  }
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

inline std::optional<std::string> env_value(const char* name) {
  const char* value = std::getenv(name);
  if (value == nullptr || *value == '\0') return std::nullopt;
  return std::string(value);
}

/// POSTs a JSON body with bounded retries and exponential backoff. Returns
/// the response body or the last error message.
inline std::pair<bool, std::string> post_json_with_retries(const std::string& endpoint,
                                                           const std::string& body,
                                                           const std::string& api_key,
                                                           int retries, int backoff_ms) {
  const SplitUrl url = split_url(endpoint);
  std::string last_error = "no attempts made";
  for (int attempt = 0; attempt <= retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms << (attempt - 1)));
    }
    httplib::Client client(url.base);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + api_key);
    }
    auto res = client.Post(url.path, headers, body, "application/json");
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
      continue;
    }
    return {true, res->body};
  }
  return {false, last_error};
}

}  // namespace detail

struct RemoteEmbedConfig {
  std::string endpoint;
  std::string model;
  std::string api_key;
  std::size_t batch_size = 64;
  int max_in_flight = 4;
  int retries = 3;
  int backoff_ms = 100;
};

/// Remote embedding provider. Wire format:
///   request  {"model": string, "input": [string, ...]}
///   response {"vectors": [[number, ...], ...]}, order-preserving.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit RemoteEmbeddingProvider(RemoteEmbedConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) {
      throw ProviderUnavailable("remote embedding endpoint is not configured");
    }
    if (config_.model.empty()) {
      throw ProviderUnavailable("remote embedding model is not configured");
    }
  }

  /// Reads EMBED_ENDPOINT, EMBED_MODEL and EMBED_API_KEY.
  static RemoteEmbedConfig config_from_env() {
    RemoteEmbedConfig config;
    config.endpoint = detail::env_value("EMBED_ENDPOINT").value_or("");
    config.model = detail::env_value("EMBED_MODEL").value_or("");
    config.api_key = detail::env_value("EMBED_API_KEY").value_or("");
    if (config.endpoint.empty()) {
      throw ProviderUnavailable("EMBED_ENDPOINT is not set");
    }
    if (config.model.empty()) {
      throw ProviderUnavailable("EMBED_MODEL is not set");
    }
    return config;
  }

  const std::string& id() const override { return config_.model; }

  /// Dimension is discovered from the first response; 0 until then.
  std::size_t dim() const override { return dim_.load(); }

  std::vector<Embedding> embed(const std::vector<std::string>& texts) override {
    std::vector<std::vector<std::string>> batches;
    for (std::size_t start = 0; start < texts.size(); start += config_.batch_size) {
      const std::size_t end = std::min(texts.size(), start + config_.batch_size);
      batches.emplace_back(texts.begin() + static_cast<std::ptrdiff_t>(start),
                           texts.begin() + static_cast<std::ptrdiff_t>(end));
    }

    std::vector<std::vector<Embedding>> results(batches.size());
    std::size_t next = 0;
    while (next < batches.size()) {
      std::vector<std::pair<std::size_t, std::future<std::vector<Embedding>>>> window;
      for (; next < batches.size() &&
             window.size() < static_cast<std::size_t>(config_.max_in_flight);
           ++next) {
        window.emplace_back(next, std::async(std::launch::async, [this, &batches, next] {
                              return embed_batch(batches[next]);
                            }));
      }
      for (auto& [index, future] : window) {
        results[index] = future.get();
      }
    }

    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (auto& batch : results) {
      for (auto& embedding : batch) {
        out.push_back(std::move(embedding));
      }
    }
    return out;
  }

 private:
  std::vector<Embedding> embed_batch(const std::vector<std::string>& texts) {
    json request;
    request["model"] = config_.model;
    request["input"] = texts;
    auto [ok, body] = detail::post_json_with_retries(config_.endpoint, request.dump(),
                                                     config_.api_key, config_.retries,
                                                     config_.backoff_ms);
    if (!ok) {
      throw ProviderUnavailable("embedding provider unreachable: " + body);
    }
    json response;
    try {
      response = json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ProviderUnavailable(std::string("embedding response is not JSON: ") + e.what());
    }
    if (!response.is_object() || !response.contains("vectors") ||
        !response.at("vectors").is_array()) {
      throw ProviderUnavailable("embedding response lacks a vectors array");
    }
    const auto& vectors = response.at("vectors");
    if (vectors.size() != texts.size()) {
      throw ProviderUnavailable("embedding response has " + std::to_string(vectors.size()) +
                                " vectors for " + std::to_string(texts.size()) + " inputs");
    }
    std::vector<Embedding> out;
    out.reserve(vectors.size());
    for (const auto& row : vectors) {
      Embedding e;
      e.provider_id = config_.model;
      e.values.reserve(row.size());
      for (const auto& value : row) {
        if (!value.is_number()) {
          throw ProviderUnavailable("embedding vector entries must be numbers");
        }
        e.values.push_back(value.get<double>());
      }
      std::size_t expected = 0;
      if (!dim_.compare_exchange_strong(expected, e.values.size()) &&
          e.values.size() != expected) {
        throw ProviderUnavailable("embedding dimension changed mid-stream");
      }
      out.push_back(std::move(e));
    }
    return out;
  }

  RemoteEmbedConfig config_;
  std::atomic<std::size_t> dim_{0};
};

struct HttpChatConfig {
  std::string endpoint;
  std::string model;
  std::string api_key;
  int retries = 3;
  int backoff_ms = 100;
};

/// Remote chat client. Wire format:
///   request  {"model", "system", "user", "temperature", "response_schema"?}
///   response {"text": string}
class HttpChatClient final : public ChatClient {
 public:
  explicit HttpChatClient(HttpChatConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) {
      throw ClientUnavailable("chat endpoint is not configured");
    }
    if (config_.model.empty()) {
      throw ClientUnavailable("chat model is not configured");
    }
  }

  /// Reads LLM_ENDPOINT, LLM_MODEL and LLM_API_KEY.
  static HttpChatClient from_env() {
    HttpChatConfig config;
    config.endpoint = detail::env_value("LLM_ENDPOINT").value_or("");
    config.model = detail::env_value("LLM_MODEL").value_or("");
    config.api_key = detail::env_value("LLM_API_KEY").value_or("");
    if (config.endpoint.empty()) {
      throw ClientUnavailable("LLM_ENDPOINT is not set");
    }
    if (config.model.empty()) {
      throw ClientUnavailable("LLM_MODEL is not set");
    }
    return HttpChatClient(std::move(config));
  }

  const std::string& model_id() const override { return config_.model; }
  bool supports_schema_enforcement() const override { return true; }

  std::string complete(const std::string& system, const std::string& user, double temperature,
                       const std::optional<std::string>& response_schema) override {
    json request;
    request["model"] = config_.model;
    request["system"] = system;
    request["user"] = user;
    request["temperature"] = temperature;
    if (response_schema) {
      request["response_schema"] = *response_schema;
    }
    auto [ok, body] = detail::post_json_with_retries(config_.endpoint, request.dump(),
                                                     config_.api_key, config_.retries,
                                                     config_.backoff_ms);
    if (!ok) {
      throw ClientUnavailable("chat endpoint unreachable: " + body);
    }
    json response;
    try {
      response = json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ClientUnavailable(std::string("chat response is not JSON: ") + e.what());
    }
    if (!response.is_object() || !response.contains("text") || !response.at("text").is_string()) {
      throw ClientUnavailable("chat response lacks a text field");
    }
    return response.at("text").get<std::string>();
  }

 private:
  HttpChatConfig config_;
};

}  // namespace fivelm
