// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "svcdisc/json.hpp"
#include "svcdisc/openapi.hpp"
#include "svcdisc/statistics.hpp"

namespace svcdisc {

/// One (model, k, strategy) combination. Agent candidates use the agent
/// label as strategy and k = 0 for "all".
struct GridCandidate {
    std::string model;
    std::size_t k = 0;
    std::string strategy;

    std::string id() const;  // "model|strategy|k"
    Json to_json() const;
    friend auto operator<=>(const GridCandidate&, const GridCandidate&) = default;
};

struct MetricsRow {
    GridCandidate candidate;
    std::string domain;
    std::size_t query = 0;  // index within the domain
    double recall = 0.0;
    double precision = 0.0;
    std::size_t retrieved = 0;  // distinct endpoints returned
};

struct Metrics {
    double recall = 0.0;
    double precision = 0.0;
    friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Set-based recall and precision; duplicates in either list are ignored.
/// Precision of an empty retrieval is 0. Throws ConfigError for an empty `expected`.
Metrics recall_precision(const std::vector<EndpointId>& expected, const std::vector<EndpointId>& retrieved);

struct Aggregate {
    GridCandidate candidate;
    double recall = 0.0;
    double precision = 0.0;
    std::size_t domains = 0;
};

/// Per candidate: mean over queries within each domain, then the unweighted
/// mean over domains. `domains` lists the domains every candidate must cover;
/// when empty, every domain seen in `rows` is required. Throws
/// ValidationError naming the first missing (candidate, domain) pair.
std::vector<Aggregate> aggregate_cross_domain(const std::vector<MetricsRow>& rows,
                                              const std::vector<std::string>& domains = {});

struct StabilityEntry {
    std::string model;
    std::string strategy;
    std::optional<std::size_t> k;  // unset: all k pooled
    double mean = 0.0;
    double stddev = 0.0;           // population standard deviation over domain means
    std::optional<double> cv;      // unset when mean is 0
    std::size_t domains = 0;
    Json to_json() const;
};

struct StabilitySummary {
    std::vector<StabilityEntry> by_model_strategy;    // k pooled
    std::vector<StabilityEntry> by_model_strategy_k;  // one entry per k
    Json to_json() const;
};

/// Recall stability across domains. Throws ValidationError when a group has
/// fewer than two domains.
StabilitySummary stability(const std::vector<MetricsRow>& rows);

struct ParetoPoint {
    std::string tag;
    double recall = 0.0;
    double precision = 0.0;
    friend bool operator==(const ParetoPoint&, const ParetoPoint&) = default;
};

/// Points no other point dominates (>= in both, > in one), in input order.
std::vector<ParetoPoint> pareto_front(const std::vector<ParetoPoint>& points);

struct TokenStat {
    std::string strategy;
    double mean_tokens = 0.0;
    std::size_t chunks = 0;
};

/// Mean tokens per chunk for each strategy, sorted ascending by mean (then name).
/// Throws ConfigError for a strategy without chunks.
std::vector<TokenStat> token_stats(const std::vector<std::pair<std::string, std::vector<std::size_t>>>& counts);

struct FriedmanEntry {
    std::string model;
    std::size_t k = 0;
    std::string domain;  // "All" for the pooled test
    std::optional<FriedmanResult> result;
    std::string error;
};

/// True for discovery-agent candidates, whose strategy is an agent label.
bool is_agent_candidate(const GridCandidate& candidate);

/// Friedman tests of recall across chunking strategies for each (model, k):
/// one per domain with queries as blocks, then "All" pooling every query.
/// Agent candidates are left out. Entries whose test cannot run carry the
/// reason in `error`. `domains` fixes the domain order.
std::vector<FriedmanEntry> friedman_tables(const std::vector<MetricsRow>& rows,
                                           const std::vector<std::string>& domains);

}  // namespace svcdisc
