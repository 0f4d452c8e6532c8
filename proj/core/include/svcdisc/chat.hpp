// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "svcdisc/json.hpp"

namespace svcdisc {

/// Task tags carried in ChatRequest::task.
namespace tasks {
inline constexpr const char* kDescribeSummary = "describe.summary";
inline constexpr const char* kDescribeQuery = "describe.query";
inline constexpr const char* kCreateServices = "bench.create_services";
inline constexpr const char* kCreateEndpoints = "bench.create_endpoints";
inline constexpr const char* kCreateOpenapi = "bench.create_openapi";
inline constexpr const char* kRepairOpenapi = "bench.repair_openapi";
inline constexpr const char* kCheckOpenapi = "bench.check_openapi";
inline constexpr const char* kCreateQuery = "bench.create_query";
inline constexpr const char* kFurtherEndpoints = "bench.further_endpoints";
inline constexpr const char* kCheckNecessary = "bench.check_necessary";
inline constexpr const char* kQueryFeedback = "bench.query_feedback";
inline constexpr const char* kAgent = "agent";
}  // namespace tasks

struct ToolCall {
    std::string id;
    std::string name;
    Json arguments = Json::object();
    friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

struct ChatMessage {
    std::string role;  // system | user | assistant | tool
    std::string content;
    std::vector<ToolCall> tool_calls;  // assistant only
    std::string tool_call_id;          // tool only
    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ToolDeclaration {
    std::string name;
    std::string description;
    Json parameters = Json::object();  // JSON schema of the arguments object
};

/// One completion request. `task` and `context` are local metadata that never
/// go over the wire; offline providers use them to answer without parsing prose.
struct ChatRequest {
    std::vector<ChatMessage> messages;
    std::vector<ToolDeclaration> tools;
    std::string task;
    Json context = Json::object();
};

struct TokenUsage {
    std::uint64_t prompt = 0;
    std::uint64_t completion = 0;
    std::uint64_t total() const noexcept { return prompt + completion; }
    TokenUsage& operator+=(const TokenUsage& o) {
        prompt += o.prompt;
        completion += o.completion;
        return *this;
    }
    friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

struct ChatResponse {
    ChatMessage message;
    TokenUsage usage;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    /// Implementations must be safe to call from several threads.
    virtual ChatResponse complete(const ChatRequest& request) = 0;
    virtual std::string fingerprint() const = 0;
};

struct ChatRetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds backoff{500};
};

enum class ChatProviderKind { Remote, Scripted, Mock };

struct LlmConfig {
    ChatProviderKind kind = ChatProviderKind::Mock;
    std::string base_url;   // Remote
    std::string model;      // Remote
    std::string api_key;    // never serialized
    std::filesystem::path script;  // Scripted
    ChatRetryPolicy retry;
    std::chrono::seconds timeout{120};
    double temperature = 0.0;
    std::uint64_t seed = 0;  // Mock

    /// Reads LLM_BASE_URL, LLM_MODEL and LLM_API_KEY over the current values.
    void apply_environment();
    Json to_json() const;
    static LlmConfig from_json(const Json& j);
};

/// OpenAI-style `POST {base_url}/chat/completions` client.
class RemoteChatProvider final : public ChatProvider {
public:
    explicit RemoteChatProvider(LlmConfig config);
    ChatResponse complete(const ChatRequest& request) override;
    std::string fingerprint() const override;

    /// Wire body for a request; exposed for tests.
    Json request_body(const ChatRequest& request) const;
    /// Parses a wire response body; throws ContentError on an unexpected shape.
    static ChatResponse parse_response(const Json& body);

private:
    LlmConfig config_;
};

/// Replays a script of canned responses.
///
/// Script entries are objects with `content` and/or `tool_calls`
/// (`[{"name", "arguments"}]`), plus optional selectors:
///  - `key`: reusable entry answering any request whose context `key` equals it;
///  - `task`: only consumed by requests with this task.
/// Entries without `key` are consumed in order. A request no entry can answer
/// raises ContentError.
class ScriptedChatProvider final : public ChatProvider {
public:
    explicit ScriptedChatProvider(Json script);
    static std::unique_ptr<ScriptedChatProvider> from_file(const std::filesystem::path& path);

    ChatResponse complete(const ChatRequest& request) override;
    std::string fingerprint() const override;

    std::size_t remaining() const;
    const std::vector<ChatRequest>& requests() const { return requests_; }

private:
    Json script_;
    std::vector<Json> keyed_;
    std::deque<Json> queue_;
    std::vector<ChatRequest> requests_;
    mutable std::mutex mutex_;
    std::uint64_t counter_ = 0;
};

/// Deterministic offline provider that understands every task this toolkit
/// issues (benchmark generation, endpoint summaries, the discovery agent).
/// Answers depend only on the request and the seed.
class MockChatProvider final : public ChatProvider {
public:
    explicit MockChatProvider(std::uint64_t seed = 0) : seed_(seed) {}
    ChatResponse complete(const ChatRequest& request) override;
    std::string fingerprint() const override;

private:
    std::uint64_t seed_;
};

std::unique_ptr<ChatProvider> make_chat_provider(const LlmConfig& config);

/// Removes a surrounding ``` fence (with optional language tag) if present.
std::string strip_code_fence(std::string_view text);

}  // namespace svcdisc
