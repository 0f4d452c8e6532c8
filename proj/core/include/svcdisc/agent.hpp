// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "svcdisc/chat.hpp"
#include "svcdisc/embedding.hpp"
#include "svcdisc/error.hpp"
#include "svcdisc/openapi.hpp"
#include "svcdisc/vector_index.hpp"

namespace svcdisc {

inline constexpr const char* kSearchTool = "search_endpoints";
inline constexpr const char* kDetailsTool = "get_endpoint_details";

struct AgentConfig {
    /// Results per search call; nullopt returns every endpoint.
    std::optional<std::size_t> k_per_search = 20;
    /// Upper bound on model calls in one session.
    std::size_t max_iterations = 10;
    /// Drop final-answer endpoints that no tool call ever returned.
    bool filter_unsurfaced = true;

    void validate() const;
    Json to_json() const;
    static AgentConfig from_json(const Json& j);
    std::string label() const;  // "agent(k=20)" or "agent(k=all)"
};

struct AgentStep {
    std::string tool;  // tool name, or "final" for the closing answer
    Json arguments = Json::object();
    std::string result;
    std::string model_message;
    TokenUsage usage;  // cumulative up to and including this step
    friend bool operator==(const AgentStep&, const AgentStep&) = default;
};

struct AgentTrace {
    std::vector<AgentStep> steps;
    std::vector<EndpointId> final_endpoints;
    std::vector<EndpointId> dropped;  // answered but never surfaced by a tool
    TokenUsage usage;
    std::size_t model_calls = 0;

    Json to_json() const;
    friend bool operator==(const AgentTrace&, const AgentTrace&) = default;
};

class AgentIterationLimit : public Error {
public:
    AgentIterationLimit(std::size_t limit, AgentTrace trace);
    const AgentTrace& trace() const noexcept { return trace_; }

private:
    AgentTrace trace_;
};

class AgentFormatError : public Error {
public:
    AgentFormatError(const std::string& message, std::string raw, AgentTrace trace = {});
    const std::string& detail() const noexcept { return detail_; }
    const std::string& raw() const noexcept { return raw_; }
    const AgentTrace& trace() const noexcept { return trace_; }

private:
    std::string detail_;
    std::string raw_;
    AgentTrace trace_;
};

/// The two tools offered to the model: summary search and endpoint details.
class DiscoveryTools {
public:
    /// `summary_index` holds one chunk per endpoint whose embedding input is
    /// the endpoint summary. `docs` are the services the endpoints come from.
    DiscoveryTools(const FlatIndex& summary_index, const std::vector<ServiceDocument>& docs,
                   EmbeddingProvider& embedder, std::optional<std::size_t> k_per_search);

    /// (endpoint, summary) pairs in rank order.
    std::vector<std::pair<EndpointId, std::string>> search(const std::string& query) const;

    /// Rendered endpoint. Throws NotFoundError for an unknown endpoint.
    std::string details(std::string_view verb, std::string_view path) const;

    std::vector<ToolDeclaration> declarations() const;

    /// Runs a tool call. Tool failures become "error: ..." results for the
    /// model instead of exceptions. Endpoints in the result go to `surfaced`.
    std::string call(const ToolCall& call, std::vector<EndpointId>& surfaced) const;

private:
    const FlatIndex& summary_index_;
    const std::vector<ServiceDocument>& docs_;
    EmbeddingProvider& embedder_;
    std::optional<std::size_t> k_;
};

/// Parses a final answer: an "ENDPOINTS:" header line followed by one
/// "<VERB> <path>" per line, optionally inside a ``` fence. Returns
/// canonical, deduplicated ids in answer order. Throws AgentFormatError.
std::vector<EndpointId> parse_final_answer(std::string_view text);

/// Formats endpoints the way parse_final_answer expects.
std::string format_final_answer(const std::vector<EndpointId>& endpoints);

struct AgentResult {
    std::vector<EndpointId> endpoints;
    AgentTrace trace;
};

/// One discovery session. Throws AgentIterationLimit after
/// `config.max_iterations` model calls without a final answer and
/// AgentFormatError when the final answer cannot be parsed.
AgentResult run_agent(const std::string& query, const AgentConfig& config, const DiscoveryTools& tools,
                      ChatProvider& llm);

}  // namespace svcdisc
