// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "svcdisc/agent.hpp"
#include "svcdisc/benchmark.hpp"
#include "svcdisc/chunking.hpp"
#include "svcdisc/embedding.hpp"
#include "svcdisc/evaluation.hpp"
#include "svcdisc/statistics.hpp"

namespace svcdisc {

/// The fourteen strategy settings of the standard grid: whole-document
/// (100|200, 0|20), JSON (100, 0|20), endpoint split with token chunking
/// (8191, 0|20), remove examples, relevant fields, JSON split token chunking
/// (8191, 0), summary, query and CRAFT.
std::vector<ChunkingStrategy> standard_strategies();

struct GridConfig {
    std::vector<ProviderConfig> models;  // M
    std::vector<std::size_t> ks = {5, 10, 20};
    std::vector<ChunkingStrategy> strategies = standard_strategies();
    /// Agent candidates, one per entry; nullopt searches all endpoints.
    std::vector<std::optional<std::size_t>> agent_ks;
    AgentConfig agent;
    std::size_t jobs = 1;

    void validate() const;
    Json to_json() const;  // without `jobs`
    static GridConfig from_json(const Json& j);
};

struct CandidateFailure {
    GridCandidate candidate;
    std::string domain;
    std::optional<std::size_t> query;  // set for a failed agent session
    std::string error;
};

struct AgentUsage {
    GridCandidate candidate;
    TokenUsage usage;
    std::size_t sessions = 0;
    std::size_t model_calls = 0;
};

struct GridReport {
    std::string fingerprint;
    Json config = Json::object();
    std::vector<std::string> domains;
    std::vector<GridCandidate> candidates;  // evaluated candidates, in grid order
    std::vector<MetricsRow> rows;
    std::vector<Aggregate> aggregates;
    std::optional<StabilitySummary> stability;
    std::string stability_error;
    std::vector<ParetoPoint> pareto;
    std::vector<FriedmanEntry> friedman;
    std::vector<TokenStat> tokens;
    std::vector<AgentUsage> agent_usage;
    std::vector<CandidateFailure> failures;

    /// candidate,model,strategy,k,domain,query,recall,precision,retrieved
    /// after a "# fingerprint: ..." line.
    std::string rows_csv() const;
    Json summary() const;
};

/// Fills aggregates, Pareto front, stability and Friedman tables of `report`
/// from its rows and domains.
void summarize_rows(GridReport& report);

/// Plain-text report: aggregates, Pareto set, stability, Friedman p-values
/// (entries with p >= 0.05 marked with *) and token statistics.
std::string render_report_text(const GridReport& report);

/// Reads rows written by GridReport::rows_csv. The fingerprint line, when
/// present, goes to `fingerprint`. Throws LoadError with a line number.
std::vector<MetricsRow> read_rows_csv(std::istream& in, std::string* fingerprint = nullptr);

/// Evaluates every candidate (model, k, strategy) and every agent candidate on
/// every query of `domains`. A candidate that fails in any domain is dropped
/// from the rows and listed under `failures`; agent sessions that fail score
/// as an empty retrieval and are listed too. `llm` serves the LLM-based
/// strategies and the agent. Output is independent of `config.jobs`.
GridReport run_grid(const std::vector<DomainBenchmark>& domains, const GridConfig& config, ChatProvider* llm,
                    const std::string& fingerprint);

}  // namespace svcdisc
