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

#include "fivelm/http_clients.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <string>
#include <thread>

#include "generators.hpp"

namespace {

using fivelm::json;

/// In-process endpoint speaking both wire formats, with a failure budget to
/// exercise the retry path.
class FakeEndpoint {
 public:
  FakeEndpoint() {
    server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      if (consume_failure()) {
        res.status = 500;
        res.set_content("injected failure", "text/plain");
        return;
      }
      const json request = json::parse(req.body);
      last_model = request.at("model").get<std::string>();
      json vectors = json::array();
      for (const auto& text : request.at("input")) {
        vectors.push_back(embed_stub(text.get<std::string>()));
      }
      json response;
      response["vectors"] = std::move(vectors);
      res.set_content(response.dump(), "application/json");
      ++embed_requests;
    });
    server_.Post("/chat", [this](const httplib::Request& req, httplib::Response& res) {
      if (consume_failure()) {
        res.status = 500;
        res.set_content("injected failure", "text/plain");
        return;
      }
      const json request = json::parse(req.body);
      fivelm::MockChatClient editor(9);
      const std::optional<std::string> schema =
          request.contains("response_schema")
              ? std::optional<std::string>(request.at("response_schema").get<std::string>())
              : std::nullopt;
      json response;
      response["text"] = editor.complete(request.at("system").get<std::string>(),
                                         request.at("user").get<std::string>(),
                                         request.at("temperature").get<double>(), schema);
      res.set_content(response.dump(), "application/json");
      ++chat_requests;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }

  static json embed_stub(const std::string& text) {
    double sum = 0;
    for (unsigned char c : text) sum += c;
    json vector = json::array();
    vector.push_back(sum);
    vector.push_back(static_cast<double>(text.size()));
    vector.push_back(1.0);
    return vector;
  }

  std::string url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }

  void fail_next(int count) { failures_ = count; }

  std::atomic<int> embed_requests{0};
  std::atomic<int> chat_requests{0};
  std::string last_model;

 private:
  bool consume_failure() {
    int current = failures_.load();
    while (current > 0) {
      if (failures_.compare_exchange_weak(current, current - 1)) return true;
    }
    return false;
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> failures_{0};
};

TEST(RemoteEmbeddingProvider, PreservesOrderAcrossConcurrentBatches) {
  FakeEndpoint endpoint;
  fivelm::RemoteEmbedConfig config;
  config.endpoint = endpoint.url("/embed");
  config.model = "stub-embedder";
  config.batch_size = 8;
  config.max_in_flight = 4;
  config.backoff_ms = 1;
  fivelm::RemoteEmbeddingProvider provider(config);

  std::vector<std::string> texts;
  for (int i = 0; i < 100; ++i) texts.push_back("text number " + std::to_string(i));
  const auto rows = provider.embed(texts);
  ASSERT_EQ(rows.size(), texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const json expected = FakeEndpoint::embed_stub(texts[i]);
    ASSERT_EQ(rows[i].dim(), 3u);
    EXPECT_EQ(rows[i].values[0], expected[0].get<double>());
    EXPECT_EQ(rows[i].values[1], expected[1].get<double>());
    EXPECT_EQ(rows[i].provider_id, "stub-embedder");
  }
  EXPECT_EQ(provider.dim(), 3u);
  EXPECT_EQ(endpoint.embed_requests.load(), 13) << "100 texts in batches of 8";
  EXPECT_EQ(endpoint.last_model, "stub-embedder");
}

TEST(RemoteEmbeddingProvider, RetriesTransientFailures) {
  FakeEndpoint endpoint;
  endpoint.fail_next(2);
  fivelm::RemoteEmbedConfig config;
  config.endpoint = endpoint.url("/embed");
  config.model = "stub-embedder";
  config.backoff_ms = 1;
  fivelm::RemoteEmbeddingProvider provider(config);
  const auto rows = provider.embed({"hello"});
  EXPECT_EQ(rows.size(), 1u);
}

TEST(RemoteEmbeddingProvider, GivesUpAfterBoundedRetries) {
  FakeEndpoint endpoint;
  endpoint.fail_next(100);
  fivelm::RemoteEmbedConfig config;
  config.endpoint = endpoint.url("/embed");
  config.model = "stub-embedder";
  config.retries = 2;
  config.backoff_ms = 1;
  fivelm::RemoteEmbeddingProvider provider(config);
  EXPECT_THROW(provider.embed({"hello"}), fivelm::ProviderUnavailable);
}

TEST(RemoteEmbeddingProvider, UnreachableEndpoint) {
  fivelm::RemoteEmbedConfig config;
  config.endpoint = "http://127.0.0.1:1/embed";
  config.model = "stub-embedder";
  config.retries = 1;
  config.backoff_ms = 1;
  fivelm::RemoteEmbeddingProvider provider(config);
  EXPECT_THROW(provider.embed({"hello"}), fivelm::ProviderUnavailable);
}

TEST(HttpChatClient, DrivesGenerationThroughTheWire) {
  FakeEndpoint endpoint;
  fivelm::HttpChatConfig config;
  config.endpoint = endpoint.url("/chat");
  config.model = "stub-chat";
  config.backoff_ms = 1;
  fivelm::HttpChatClient client(config);
  EXPECT_EQ(client.model_id(), "stub-chat");

  gen::Rng rng(70);
  fivelm::EditRequest req;
  req.source = gen::random_scenario(rng, fivelm::StructureMode::kHard,
                                    fivelm::Taxonomy::defaults(), "ref-http");
  req.target_layer = 4;
  req.structure_mode = fivelm::StructureMode::kHard;
  req.n_variants = 4;

  const auto result = fivelm::generate_edits(client, req);
  EXPECT_EQ(result.accepted.size(), 4u);
  EXPECT_GE(endpoint.chat_requests.load(), 4);
  for (const auto& s : result.accepted) {
    EXPECT_EQ(s.provenance->model_id, "stub-chat");
    EXPECT_EQ(fivelm::diff_layers(req.source, s), (std::set<int>{4}));
  }
}

TEST(HttpChatClient, UnreachableEndpointRaisesClientUnavailable) {
  fivelm::HttpChatConfig config;
  config.endpoint = "http://127.0.0.1:1/chat";
  config.model = "stub-chat";
  config.retries = 1;
  config.backoff_ms = 1;
  fivelm::HttpChatClient client(config);
  EXPECT_THROW(client.complete("s", "u", 1.0, std::nullopt), fivelm::ClientUnavailable);
}

}  // namespace
