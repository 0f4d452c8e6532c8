// SPDX-License-Identifier: Apache-2.0
#include "svcdisc/chat.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "chat_internal.hpp"
#include "http.hpp"
#include "svcdisc/error.hpp"
#include "svcdisc/hashing.hpp"
#include "svcdisc/tokenizer.hpp"

namespace svcdisc {

namespace {

const char* kind_name(ChatProviderKind k) {
    switch (k) {
        case ChatProviderKind::Remote: return "remote";
        case ChatProviderKind::Scripted: return "scripted";
        case ChatProviderKind::Mock: return "mock";
    }
    return "mock";
}

ChatProviderKind kind_from(const std::string& s) {
    if (s == "remote") return ChatProviderKind::Remote;
    if (s == "scripted") return ChatProviderKind::Scripted;
    if (s == "mock") return ChatProviderKind::Mock;
    throw ConfigError("unknown chat provider kind '" + s + "' (remote, scripted, mock)");
}

std::uint64_t prompt_tokens(const ChatRequest& request) {
    std::uint64_t n = 0;
    for (const auto& m : request.messages) {
        n += count_tokens(m.content);
        for (const auto& call : m.tool_calls) n += count_tokens(call.arguments.dump());
    }
    return n;
}

std::uint64_t completion_tokens(const ChatMessage& m) {
    std::uint64_t n = count_tokens(m.content);
    for (const auto& call : m.tool_calls) n += count_tokens(call.name) + count_tokens(call.arguments.dump());
    return n;
}

}  // namespace

std::string strip_code_fence(std::string_view text) {
    auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    text.remove_prefix(first);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
    if (text.rfind("```", 0) != 0) return std::string(text);
    auto nl = text.find('\n');
    if (nl == std::string_view::npos) return {};
    text.remove_prefix(nl + 1);
    if (text.size() >= 3 && text.substr(text.size() - 3) == "```") text.remove_suffix(3);
    return std::string(text);
}

// ---------------------------------------------------------------------------
// LlmConfig

void LlmConfig::apply_environment() {
    if (const char* v = std::getenv("LLM_BASE_URL"); v && *v) base_url = v;
    if (const char* v = std::getenv("LLM_MODEL"); v && *v) model = v;
    if (const char* v = std::getenv("LLM_API_KEY"); v && *v) api_key = v;
}

Json LlmConfig::to_json() const {
    Json j;
    j["kind"] = kind_name(kind);
    if (kind == ChatProviderKind::Remote) {
        j["base_url"] = base_url;
        j["model"] = model;
        j["temperature"] = temperature;
        j["max_attempts"] = retry.max_attempts;
        j["backoff_ms"] = retry.backoff.count();
        j["timeout_s"] = timeout.count();
    } else if (kind == ChatProviderKind::Scripted) {
        j["script"] = script.string();
    } else {
        j["seed"] = seed;
    }
    return j;
}

LlmConfig LlmConfig::from_json(const Json& j) {
    LlmConfig c;
    c.kind = kind_from(j.value("kind", std::string("mock")));
    c.base_url = j.value("base_url", c.base_url);
    c.model = j.value("model", c.model);
    c.temperature = j.value("temperature", c.temperature);
    c.retry.max_attempts = j.value("max_attempts", c.retry.max_attempts);
    c.retry.backoff = std::chrono::milliseconds(j.value("backoff_ms", c.retry.backoff.count()));
    c.timeout = std::chrono::seconds(j.value("timeout_s", c.timeout.count()));
    c.script = j.value("script", std::string{});
    c.seed = j.value("seed", c.seed);
    if (c.retry.max_attempts < 1) throw ConfigError("llm.max_attempts must be >= 1");
    return c;
}

// ---------------------------------------------------------------------------
// RemoteChatProvider

RemoteChatProvider::RemoteChatProvider(LlmConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw ConfigError("LLM_BASE_URL / llm.base_url is not set");
    if (config_.model.empty()) throw ConfigError("LLM_MODEL / llm.model is not set");
}

std::string RemoteChatProvider::fingerprint() const {
    return "remote:" + config_.model;
}

Json RemoteChatProvider::request_body(const ChatRequest& request) const {
    Json body;
    body["model"] = config_.model;
    body["temperature"] = config_.temperature;
    Json messages = Json::array();
    for (const auto& m : request.messages) {
        Json wire;
        wire["role"] = m.role;
        wire["content"] = m.content;
        if (!m.tool_calls.empty()) {
            Json calls = Json::array();
            for (const auto& c : m.tool_calls) {
                calls.push_back({{"id", c.id},
                                 {"type", "function"},
                                 {"function", {{"name", c.name}, {"arguments", c.arguments.dump()}}}});
            }
            wire["tool_calls"] = std::move(calls);
        }
        if (!m.tool_call_id.empty()) wire["tool_call_id"] = m.tool_call_id;
        messages.push_back(std::move(wire));
    }
    body["messages"] = std::move(messages);
    if (!request.tools.empty()) {
        Json tools = Json::array();
        for (const auto& t : request.tools) {
            tools.push_back({{"type", "function"},
                             {"function",
                              {{"name", t.name},
                               {"description", t.description},
                               {"parameters", t.parameters}}}});
        }
        body["tools"] = std::move(tools);
    }
    return body;
}

ChatResponse RemoteChatProvider::parse_response(const Json& body) {
    try {
        const auto& message = body.at("choices").at(0).at("message");
        ChatResponse r;
        r.message.role = "assistant";
        if (auto c = message.find("content"); c != message.end() && c->is_string()) {
            r.message.content = c->get<std::string>();
        }
        if (auto calls = message.find("tool_calls"); calls != message.end() && calls->is_array()) {
            for (const auto& call : *calls) {
                ToolCall tc;
                tc.id = call.value("id", std::string{});
                const auto& fn = call.at("function");
                tc.name = fn.at("name").get<std::string>();
                const auto& args = fn.at("arguments");
                if (args.is_string()) {
                    auto text = args.get<std::string>();
                    try {
                        tc.arguments = text.empty() ? Json::object() : Json::parse(text);
                    } catch (const nlohmann::json::parse_error&) {
                        // Passed through so the agent can report it back to the model.
                        tc.arguments = Json{{"_unparsed", text}};
                    }
                } else {
                    tc.arguments = args;
                }
                r.message.tool_calls.push_back(std::move(tc));
            }
        }
        if (auto usage = body.find("usage"); usage != body.end() && usage->is_object()) {
            r.usage.prompt = usage->value("prompt_tokens", std::uint64_t{0});
            r.usage.completion = usage->value("completion_tokens", std::uint64_t{0});
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ContentError(std::string("unexpected chat completion shape: ") + e.what());
    }
}

ChatResponse RemoteChatProvider::complete(const ChatRequest& request) {
    const Json body = request_body(request);
    std::vector<std::pair<std::string, std::string>> headers;
    if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);
    std::string last_error;
    auto backoff = config_.retry.backoff;
    for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
        try {
            auto res = detail::post_json(config_.base_url, "/chat/completions", body, headers,
                                         config_.timeout);
            if (res.status == 200) {
                Json parsed;
                try {
                    parsed = Json::parse(res.body);
                } catch (const nlohmann::json::parse_error& e) {
                    throw ContentError(std::string("chat response is not JSON: ") + e.what());
                }
                return parse_response(parsed);
            }
            last_error = fmt::format("HTTP {}: {}", res.status, res.body.substr(0, 300));
            if (!detail::retryable_status(res.status)) break;
        } catch (const TransportError& e) {
            last_error = e.what();
        }
        if (attempt < config_.retry.max_attempts) {
            spdlog::warn("chat completion attempt {} failed ({}); retrying", attempt, last_error);
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    throw TransportError("chat completion failed: " + last_error);
}

// ---------------------------------------------------------------------------
// ScriptedChatProvider

ScriptedChatProvider::ScriptedChatProvider(Json script) : script_(std::move(script)) {
    const Json& entries = script_.is_object() ? script_.at("responses") : script_;
    if (!entries.is_array()) throw ConfigError("chat script must be an array of responses");
    for (const auto& e : entries) {
        if (!e.is_object()) throw ConfigError("chat script entries must be objects");
        if (e.contains("key")) {
            keyed_.push_back(e);
        } else {
            queue_.push_back(e);
        }
    }
}

std::unique_ptr<ScriptedChatProvider> ScriptedChatProvider::from_file(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open chat script " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return std::make_unique<ScriptedChatProvider>(Json::parse(ss.str()));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string(), e.what());
    }
}

std::string ScriptedChatProvider::fingerprint() const {
    return "scripted:" + fingerprint_of(script_);
}

std::size_t ScriptedChatProvider::remaining() const {
    std::lock_guard lock(mutex_);
    return queue_.size();
}

ChatResponse ScriptedChatProvider::complete(const ChatRequest& request) {
    std::lock_guard lock(mutex_);
    requests_.push_back(request);
    const Json* entry = nullptr;
    Json popped;
    const auto key = request.context.is_object() ? request.context.value("key", std::string{})
                                                 : std::string{};
    if (!key.empty()) {
        for (const auto& e : keyed_) {
            if (e.value("key", std::string{}) == key &&
                (!e.contains("task") || e.value("task", std::string{}) == request.task)) {
                entry = &e;
                break;
            }
        }
    }
    if (!entry) {
        if (queue_.empty()) {
            throw ContentError(fmt::format("chat script exhausted (task '{}', request #{})",
                                           request.task, requests_.size()));
        }
        popped = std::move(queue_.front());
        queue_.pop_front();
        if (popped.contains("task") && popped.value("task", std::string{}) != request.task) {
            throw ContentError(fmt::format("chat script expected task '{}' but got '{}'",
                                           popped.value("task", std::string{}), request.task));
        }
        entry = &popped;
    }

    ChatResponse r;
    r.message.role = "assistant";
    r.message.content = entry->value("content", std::string{});
    if (auto calls = entry->find("tool_calls"); calls != entry->end()) {
        for (const auto& c : *calls) {
            ToolCall tc;
            tc.id = c.value("id", fmt::format("call_{}", ++counter_));
            tc.name = c.at("name").get<std::string>();
            tc.arguments = c.value("arguments", Json::object());
            r.message.tool_calls.push_back(std::move(tc));
        }
    }
    r.usage.prompt = prompt_tokens(request);
    r.usage.completion = completion_tokens(r.message);
    return r;
}

// ---------------------------------------------------------------------------

std::unique_ptr<ChatProvider> make_chat_provider(const LlmConfig& config) {
    switch (config.kind) {
        case ChatProviderKind::Remote: return std::make_unique<RemoteChatProvider>(config);
        case ChatProviderKind::Scripted:
            return ScriptedChatProvider::from_file(config.script);
        case ChatProviderKind::Mock: return std::make_unique<MockChatProvider>(config.seed);
    }
    throw ConfigError("unknown chat provider kind");
}

namespace detail {
TokenUsage estimate_usage(const ChatRequest& request, const ChatMessage& reply) {
    return {prompt_tokens(request), completion_tokens(reply)};
}
}  // namespace detail

}  // namespace svcdisc
