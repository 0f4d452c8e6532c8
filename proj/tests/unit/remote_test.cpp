// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <mutex>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "svcdisc/chat.hpp"
#include "svcdisc/embedding.hpp"
#include "svcdisc/error.hpp"

using namespace svcdisc;

namespace {

// Local OpenAI-style server. The first `failures` requests get HTTP 500.
class FakeApi {
public:
    FakeApi() {
        server_.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
            if (!record(req, res)) return;
            const auto body = Json::parse(req.body);
            Json data = Json::array();
            const auto& input = body.at("input");
            // reversed order to check that `index` is honoured
            for (std::size_t i = input.size(); i-- > 0;) {
                const double len = static_cast<double>(input[i].get<std::string>().size());
                data.push_back({{"index", i}, {"embedding", {len, 1.0, 0.0}}});
            }
            res.set_content(Json{{"data", data}}.dump(), "application/json");
        });
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            if (!record(req, res)) return;
            const Json reply = {
                {"choices",
                 {{{"message",
                    {{"role", "assistant"},
                     {"content", nullptr},
                     {"tool_calls",
                      {{{"id", "call_1"},
                        {"type", "function"},
                        {"function", {{"name", "search_endpoints"}, {"arguments", R"({"query":"pets"})"}}}}}}}}}}},
                {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 4}}}};
            res.set_content(reply.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeApi() {
        server_.stop();
        thread_.join();
    }

    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
    std::atomic<int> failures{0};
    std::atomic<int> hits{0};
    std::mutex mutex;
    std::vector<Json> bodies;
    std::vector<std::string> auth;

private:
    bool record(const httplib::Request& req, httplib::Response& res) {
        ++hits;
        {
            std::lock_guard lock(mutex);
            bodies.push_back(Json::parse(req.body));
            auth.push_back(req.get_header_value("Authorization"));
        }
        if (failures > 0) {
            --failures;
            res.status = 500;
            res.set_content("overloaded", "text/plain");
            return false;
        }
        return true;
    }

    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

ProviderConfig remote_embedding(const FakeApi& api) {
    ProviderConfig c;
    c.kind = EmbeddingProviderKind::Remote;
    c.base_url = api.base_url();
    c.model = "text-embed";
    c.dimension = 3;
    c.batch_size = 2;
    c.parallelism = 2;
    c.retry.backoff = std::chrono::milliseconds(1);
    c.timeout = std::chrono::seconds(5);
    return c;
}

LlmConfig remote_llm(const FakeApi& api) {
    LlmConfig c;
    c.kind = ChatProviderKind::Remote;
    c.base_url = api.base_url();
    c.model = "chat-model";
    c.retry.backoff = std::chrono::milliseconds(1);
    c.timeout = std::chrono::seconds(5);
    return c;
}

}  // namespace

TEST(RemoteEmbeddingTest, BatchesAndKeepsInputOrder) {
    FakeApi api;
    auto config = remote_embedding(api);
    config.api_key = "k-123";
    RemoteEmbeddingProvider provider(config);
    const auto vectors = provider.embed({"a", "bbb", "cc", "dddd", "e"});
    ASSERT_EQ(vectors.size(), 5u);
    EXPECT_EQ(api.hits.load(), 3);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        const double len = std::vector<double>{1, 3, 2, 4, 1}[i];
        EXPECT_NEAR(vectors[i].values[0] / vectors[i].values[1], len, 1e-5);
        EXPECT_NEAR(dot(vectors[i], vectors[i]), 1.0, 1e-6);
    }
    std::lock_guard lock(api.mutex);
    for (const auto& b : api.bodies) {
        EXPECT_EQ(b.at("model"), "text-embed");
        EXPECT_LE(b.at("input").size(), 2u);
    }
    for (const auto& a : api.auth) EXPECT_EQ(a, "Bearer k-123");
}

TEST(RemoteEmbeddingTest, RetriesServerErrors) {
    FakeApi api;
    api.failures = 2;
    RemoteEmbeddingProvider provider(remote_embedding(api));
    EXPECT_EQ(provider.embed({"x"}).size(), 1u);
    EXPECT_EQ(api.hits.load(), 3);
}

TEST(RemoteEmbeddingTest, GivesUpAfterMaxAttempts) {
    FakeApi api;
    api.failures = 10;
    RemoteEmbeddingProvider provider(remote_embedding(api));
    EXPECT_THROW(provider.embed({"x"}), TransportError);
    EXPECT_EQ(api.hits.load(), 3);
}

TEST(RemoteEmbeddingTest, DimensionMismatchIsContractError) {
    FakeApi api;
    auto config = remote_embedding(api);
    config.dimension = 4;
    RemoteEmbeddingProvider provider(config);
    EXPECT_THROW(provider.embed({"x"}), ContractError);
}

TEST(RemoteEmbeddingTest, UnreachableHostIsTransportError) {
    ProviderConfig c;
    c.kind = EmbeddingProviderKind::Remote;
    c.base_url = "http://127.0.0.1:1/v1";
    c.retry.max_attempts = 1;
    c.timeout = std::chrono::seconds(2);
    RemoteEmbeddingProvider provider(c);
    EXPECT_THROW(provider.embed({"x"}), TransportError);
}

TEST(RemoteChatTest, WireFormatAndToolCalls) {
    FakeApi api;
    auto config = remote_llm(api);
    config.api_key = "chat-key";
    RemoteChatProvider provider(config);
    ChatRequest req;
    req.messages = {{"system", "be brief", {}, {}},
                    {"user", "find pets", {}, {}},
                    {"assistant", "", {{"c0", "search_endpoints", {{"query", "cats"}}}}, {}},
                    {"tool", "GET /pets", {}, "c0"}};
    req.tools = {{"search_endpoints", "search", {{"type", "object"}}}};
    req.task = "agent";
    req.context = {{"key", "local only"}};
    const auto r = provider.complete(req);
    ASSERT_EQ(r.message.tool_calls.size(), 1u);
    EXPECT_EQ(r.message.tool_calls[0].name, "search_endpoints");
    EXPECT_EQ(r.message.tool_calls[0].arguments, (Json{{"query", "pets"}}));
    EXPECT_EQ(r.usage.total(), 15u);

    std::lock_guard lock(api.mutex);
    ASSERT_EQ(api.bodies.size(), 1u);
    const auto& body = api.bodies[0];
    EXPECT_EQ(body.at("model"), "chat-model");
    EXPECT_EQ(body.at("messages").size(), 4u);
    EXPECT_EQ(body["messages"][2]["tool_calls"][0]["function"]["arguments"], R"({"query":"cats"})");
    EXPECT_EQ(body["messages"][3]["tool_call_id"], "c0");
    EXPECT_EQ(body["tools"][0]["function"]["name"], "search_endpoints");
    EXPECT_FALSE(body.contains("task"));
    EXPECT_FALSE(body.contains("context"));
    EXPECT_EQ(api.auth[0], "Bearer chat-key");
}

TEST(RemoteChatTest, RetriesThenFails) {
    FakeApi api;
    api.failures = 1;
    RemoteChatProvider ok(remote_llm(api));
    EXPECT_NO_THROW(ok.complete({{{"user", "hi", {}, {}}}, {}, {}, Json::object()}));
    EXPECT_EQ(api.hits.load(), 2);
    api.failures = 5;
    RemoteChatProvider failing(remote_llm(api));
    EXPECT_THROW(failing.complete({{{"user", "hi", {}, {}}}, {}, {}, Json::object()}), TransportError);
}

TEST(RemoteChatTest, UnexpectedShapeIsContentError) {
    EXPECT_THROW(RemoteChatProvider::parse_response(Json{{"nothing", 1}}), ContentError);
    const auto r = RemoteChatProvider::parse_response(
        Json{{"choices", {{{"message", {{"content", "hello"}}}}}}});
    EXPECT_EQ(r.message.content, "hello");
    EXPECT_EQ(r.usage.total(), 0u);
}
