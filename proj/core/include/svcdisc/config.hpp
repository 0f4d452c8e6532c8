// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "svcdisc/agent.hpp"
#include "svcdisc/benchmark.hpp"
#include "svcdisc/chat.hpp"
#include "svcdisc/chunking.hpp"
#include "svcdisc/embedding.hpp"
#include "svcdisc/grid.hpp"
#include "svcdisc/prompts.hpp"

namespace svcdisc {

/// Everything a run depends on. Read from one JSON file; command-line flags
/// override single fields; secrets come from the environment only.
struct ToolkitConfig {
    ChunkingStrategy strategy = ChunkingStrategy::from_name("endpoint-split", 8191, 0);
    ProviderConfig embedding;
    LlmConfig llm;
    std::size_t k = 5;
    AgentConfig agent;
    BenchmarkConfig benchmark;
    GridConfig grid;  // an empty model list means {embedding}
    std::size_t jobs = 1;

    void validate() const;
    /// Keys: strategy, embedding, llm, k, agent, benchmark, grid, jobs. Unknown keys throw ConfigError.
    static ToolkitConfig from_json(const Json& j);
    Json to_json() const;
    static ToolkitConfig load(const std::filesystem::path& path);

    /// EMBED_* and LLM_* environment variables.
    void apply_environment();
    /// Switches to the deterministic local embedder and the offline mock chat provider.
    void use_mock_providers();
    /// `grid` with models filled in and `jobs` applied.
    GridConfig effective_grid() const;
};

/// Stable hash of everything that shapes results: strategy, embedding and
/// chat provider identity, k, agent, benchmark and grid settings, and the
/// prompt template version. Transport settings, secrets and `jobs` are left out.
std::string emit_config_fingerprint(const ToolkitConfig& config,
                                    const PromptTemplates& templates = PromptTemplates::builtin());

}  // namespace svcdisc
