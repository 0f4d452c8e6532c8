// SPDX-License-Identifier: Apache-2.0
#include "svcdisc/agent.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <fmt/format.h>

#include "svcdisc/prompts.hpp"

namespace svcdisc {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

Json usage_json(const TokenUsage& u) {
    return Json{{"prompt", u.prompt}, {"completion", u.completion}, {"total", u.total()}};
}

Json ids_json(const std::vector<EndpointId>& ids) {
    Json out = Json::array();
    for (const auto& id : ids) out.push_back(id.str());
    return out;
}

std::string arg_string(const Json& args, const char* name) {
    auto it = args.find(name);
    if (it == args.end() || !it->is_string()) {
        throw ConfigError(fmt::format("missing string argument '{}'", name));
    }
    return it->get<std::string>();
}

}  // namespace

// ---------------------------------------------------------------------------
// AgentConfig

void AgentConfig::validate() const {
    if (max_iterations == 0) throw ConfigError("max_iterations must be at least 1");
    if (k_per_search && *k_per_search == 0) throw ConfigError("k_per_search must be at least 1");
}

Json AgentConfig::to_json() const {
    Json j;
    if (k_per_search) {
        j["k_per_search"] = *k_per_search;
    } else {
        j["k_per_search"] = "all";
    }
    j["max_iterations"] = max_iterations;
    j["filter_unsurfaced"] = filter_unsurfaced;
    return j;
}

AgentConfig AgentConfig::from_json(const Json& j) {
    AgentConfig c;
    if (auto it = j.find("k_per_search"); it != j.end()) {
        if (it->is_string() && it->get<std::string>() == "all") {
            c.k_per_search.reset();
        } else {
            c.k_per_search = it->get<std::size_t>();
        }
    }
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.filter_unsurfaced = j.value("filter_unsurfaced", c.filter_unsurfaced);
    c.validate();
    return c;
}

std::string AgentConfig::label() const {
    return k_per_search ? fmt::format("agent(k={})", *k_per_search) : std::string("agent(k=all)");
}

Json AgentTrace::to_json() const {
    Json steps_json = Json::array();
    for (const auto& s : steps) {
        steps_json.push_back({{"tool", s.tool},
                              {"arguments", s.arguments},
                              {"result", s.result},
                              {"model_message", s.model_message},
                              {"usage", usage_json(s.usage)}});
    }
    return Json{{"steps", std::move(steps_json)},
                {"final_endpoints", ids_json(final_endpoints)},
                {"dropped", ids_json(dropped)},
                {"model_calls", model_calls},
                {"usage", usage_json(usage)}};
}

AgentIterationLimit::AgentIterationLimit(std::size_t limit, AgentTrace trace)
    : Error(fmt::format("agent gave no final answer within {} model calls", limit)),
      trace_(std::move(trace)) {}

AgentFormatError::AgentFormatError(const std::string& message, std::string raw, AgentTrace trace)
    : Error("unparseable final answer: " + message),
      detail_(message),
      raw_(std::move(raw)),
      trace_(std::move(trace)) {}

// ---------------------------------------------------------------------------
// Tools

DiscoveryTools::DiscoveryTools(const FlatIndex& summary_index, const std::vector<ServiceDocument>& docs,
                               EmbeddingProvider& embedder, std::optional<std::size_t> k_per_search)
    : summary_index_(summary_index), docs_(docs), embedder_(embedder), k_(k_per_search) {
    if (k_ && *k_ == 0) throw ConfigError("k_per_search must be at least 1");
}

std::vector<std::pair<EndpointId, std::string>> DiscoveryTools::search(const std::string& query) const {
    if (summary_index_.size() == 0) throw StateError("summary index is empty");
    auto q = embed_texts({query}, embedder_).front();
    std::vector<std::pair<EndpointId, std::string>> out;
    for (const auto& hit : summary_index_.top_k(q, k_.value_or(summary_index_.size()))) {
        const auto& chunk = summary_index_.chunk(hit.id);
        for (const auto& ref : chunk.endpoint_refs) out.emplace_back(ref, chunk.embedding_input);
    }
    return out;
}

std::string DiscoveryTools::details(std::string_view verb, std::string_view path) const {
    auto id = EndpointId::make(verb, path);
    for (const auto& doc : docs_) {
        if (const auto* e = doc.find(id)) return render_endpoint_text(*e);
    }
    throw NotFoundError("unknown endpoint " + id.str());
}

std::vector<ToolDeclaration> DiscoveryTools::declarations() const {
    return {
        {kSearchTool,
         "Semantic search over endpoint summaries. Returns endpoints with their summaries.",
         Json{{"type", "object"},
              {"properties", {{"query", {{"type", "string"}, {"description", "what to look for"}}}}},
              {"required", {"query"}}}},
        {kDetailsTool,
         "Returns the full specification of one endpoint.",
         Json{{"type", "object"},
              {"properties",
               {{"verb", {{"type", "string"}, {"description", "HTTP method, e.g. GET"}}},
                {"path", {{"type", "string"}, {"description", "path template, e.g. /orders/{id}"}}}}},
              {"required", {"verb", "path"}}}},
    };
}

std::string DiscoveryTools::call(const ToolCall& call, std::vector<EndpointId>& surfaced) const {
    try {
        if (call.name == kSearchTool) {
            Json out = Json::array();
            for (auto& [id, summary] : search(arg_string(call.arguments, "query"))) {
                out.push_back({{"endpoint", id.str()}, {"summary", summary}});
                surfaced.push_back(std::move(id));
            }
            return out.dump(2);
        }
        if (call.name == kDetailsTool) {
            auto text = details(arg_string(call.arguments, "verb"), arg_string(call.arguments, "path"));
            surfaced.push_back(EndpointId::make(arg_string(call.arguments, "verb"),
                                                arg_string(call.arguments, "path")));
            return text;
        }
        return "error: unknown tool '" + call.name + "'";
    } catch (const Error& e) {
        return std::string("error: ") + e.what();
    }
}

// ---------------------------------------------------------------------------
// Final answers

std::vector<EndpointId> parse_final_answer(std::string_view text) {
    std::vector<std::string_view> lines;
    for (std::size_t pos = 0; pos <= text.size();) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        lines.push_back(trim(text.substr(pos, nl - pos)));
        pos = nl + 1;
    }
    auto header = std::find(lines.begin(), lines.end(), std::string_view("ENDPOINTS:"));
    if (header == lines.end()) {
        throw AgentFormatError("no 'ENDPOINTS:' header", std::string(text));
    }
    std::vector<EndpointId> out;
    std::set<EndpointId> seen;
    for (auto it = std::next(header); it != lines.end(); ++it) {
        auto line = *it;
        if (line.rfind("```", 0) == 0) break;
        if (line.empty()) continue;
        if (line.rfind("- ", 0) == 0) line = trim(line.substr(2));
        try {
            auto id = EndpointId::parse(line);
            if (seen.insert(id).second) out.push_back(std::move(id));
        } catch (const ConfigError& e) {
            throw AgentFormatError(fmt::format("line '{}': {}", line, e.what()), std::string(text));
        }
    }
    return out;
}

std::string format_final_answer(const std::vector<EndpointId>& endpoints) {
    std::string out = "```\nENDPOINTS:\n";
    for (const auto& e : endpoints) out += e.str() + "\n";
    return out + "```";
}

// ---------------------------------------------------------------------------
// Session loop

AgentResult run_agent(const std::string& query, const AgentConfig& config, const DiscoveryTools& tools,
                      ChatProvider& llm) {
    config.validate();
    const auto& templates = PromptTemplates::builtin();
    std::vector<ChatMessage> messages{{"system", templates.get("agent_system"), {}, {}},
                                      {"user", query, {}, {}}};
    const auto declarations = tools.declarations();

    AgentTrace trace;
    std::vector<EndpointId> surfaced;
    for (std::size_t iteration = 1; iteration <= config.max_iterations; ++iteration) {
        ChatRequest request;
        request.messages = messages;
        request.tools = declarations;
        request.task = tasks::kAgent;
        request.context = {{"query", query}, {"iteration", iteration}};
        auto response = llm.complete(request);
        ++trace.model_calls;
        trace.usage += response.usage;
        messages.push_back(response.message);

        if (!response.message.tool_calls.empty()) {
            for (std::size_t i = 0; i < response.message.tool_calls.size(); ++i) {
                auto call = response.message.tool_calls[i];
                if (call.id.empty()) call.id = fmt::format("call_{}_{}", iteration, i);
                auto result = tools.call(call, surfaced);
                messages.push_back({"tool", result, {}, call.id});
                trace.steps.push_back({call.name, call.arguments, result, response.message.content, trace.usage});
            }
            continue;
        }

        const auto& content = response.message.content;
        trace.steps.push_back({"final", Json::object(), "", content, trace.usage});
        std::vector<EndpointId> answer;
        try {
            answer = parse_final_answer(content);
        } catch (const AgentFormatError& e) {
            throw AgentFormatError(e.detail(), content, trace);
        }
        std::set<EndpointId> known(surfaced.begin(), surfaced.end());
        for (auto& id : answer) {
            if (!config.filter_unsurfaced || known.contains(id)) {
                trace.final_endpoints.push_back(std::move(id));
            } else {
                trace.dropped.push_back(std::move(id));
            }
        }
        return {trace.final_endpoints, std::move(trace)};
    }
    throw AgentIterationLimit(config.max_iterations, std::move(trace));
}

}  // namespace svcdisc
