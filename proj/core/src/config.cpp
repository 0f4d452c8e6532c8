// SPDX-License-Identifier: Apache-2.0
#include "svcdisc/config.hpp"

#include <fstream>

#include <fmt/format.h>

#include "svcdisc/hashing.hpp"

namespace svcdisc {

namespace {

const char* const kKeys[] = {"strategy", "embedding", "llm", "k", "agent", "benchmark", "grid", "jobs"};

Json llm_identity(const LlmConfig& llm) {
    auto j = llm.to_json();
    for (const char* transport : {"base_url", "max_attempts", "backoff_ms", "timeout_s"}) j.erase(transport);
    return j;
}

}  // namespace

void ToolkitConfig::validate() const {
    strategy.validate();
    embedding.validate();
    if (k == 0) throw ConfigError("k must be at least 1");
    agent.validate();
    benchmark.validate();
    if (jobs == 0) throw ConfigError("jobs must be at least 1");
    effective_grid().validate();
}

ToolkitConfig ToolkitConfig::from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    ToolkitConfig c;
    try {
        if (auto it = j.find("strategy"); it != j.end()) {
            c.strategy = it->is_string() ? ChunkingStrategy::from_name(it->get<std::string>())
                                         : ChunkingStrategy::from_json(*it);
        }
        if (auto it = j.find("embedding"); it != j.end()) c.embedding = ProviderConfig::from_json(*it);
        if (auto it = j.find("llm"); it != j.end()) c.llm = LlmConfig::from_json(*it);
        c.k = j.value("k", c.k);
        if (auto it = j.find("agent"); it != j.end()) c.agent = AgentConfig::from_json(*it);
        if (auto it = j.find("benchmark"); it != j.end()) c.benchmark = BenchmarkConfig::from_json(*it);
        if (auto it = j.find("grid"); it != j.end()) c.grid = GridConfig::from_json(*it);
        c.jobs = j.value("jobs", c.jobs);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    return c;
}

Json ToolkitConfig::to_json() const {
    return Json{{"strategy", strategy.to_json()}, {"embedding", embedding.to_json()}, {"llm", llm.to_json()},
                {"k", k},  {"agent", agent.to_json()},     {"benchmark", benchmark.to_json()},
                {"grid", grid.to_json()}, {"jobs", jobs}};
}

ToolkitConfig ToolkitConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    try {
        return from_json(Json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(fmt::format("{}: byte {}: malformed JSON", path.string(), e.byte));
    }
}

void ToolkitConfig::apply_environment() {
    embedding.apply_environment();
    llm.apply_environment();
}

void ToolkitConfig::use_mock_providers() {
    embedding.kind = EmbeddingProviderKind::DeterministicLocal;
    embedding.base_url.clear();
    if (embedding.model.empty()) embedding.model = "hash-bigram";
    for (auto& m : grid.models) m.kind = EmbeddingProviderKind::DeterministicLocal;
    llm.kind = ChatProviderKind::Mock;
}

GridConfig ToolkitConfig::effective_grid() const {
    GridConfig g = grid;
    if (g.models.empty()) g.models.push_back(embedding);
    g.jobs = jobs;
    return g;
}

std::string emit_config_fingerprint(const ToolkitConfig& config, const PromptTemplates& templates) {
    auto grid = config.effective_grid();
    Json grid_json = grid.to_json();
    Json models = Json::array();
    for (const auto& m : grid.models) models.push_back(m.fingerprint());
    grid_json["models"] = std::move(models);
    return fingerprint_of(Json{{"strategy", config.strategy.to_json()},
                               {"embedding", config.embedding.fingerprint()},
                               {"llm", llm_identity(config.llm)},
                               {"k", config.k},
                               {"agent", config.agent.to_json()},
                               {"benchmark", config.benchmark.to_json()},
                               {"grid", std::move(grid_json)},
                               {"prompts", templates.version}});
}

}  // namespace svcdisc
