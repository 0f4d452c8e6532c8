// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "svcdisc/chat.hpp"
#include "svcdisc/embedding.hpp"
#include "svcdisc/error.hpp"
#include "svcdisc/openapi.hpp"
#include "svcdisc/prompts.hpp"

namespace svcdisc {

/// The eleven GICS sectors.
inline const std::vector<std::string> kGicsSectors = {
    "Energy",           "Materials",        "Industrials",           "Consumer Discretionary",
    "Consumer Staples", "Health Care",      "Financials",            "Information Technology",
    "Communication Services", "Utilities", "Real Estate"};

struct RetryBudgets {
    std::size_t repair_rounds = 3;    // per OpenAPI attempt
    std::size_t regenerations = 5;    // fresh attempts for lists and OpenAPIs
    std::size_t query_redraws = 20;   // per query slot
    std::size_t feedback_rounds = 3;  // mismatch feedback per drawn query
};

struct BenchmarkConfig {
    std::vector<std::string> domains = kGicsSectors;
    std::size_t n_s = 5;   // services per domain
    std::size_t n_e = 10;  // endpoints per service
    std::size_t n_q = 10;  // queries per domain
    double mu = 5.0;       // expected-set size distribution
    double sigma = 2.0;
    double s_threshold = 0.8;
    std::size_t instances = 5;
    std::uint64_t seed = 0;
    RetryBudgets budgets;
    std::size_t parallelism = 1;  // domains generated concurrently

    void validate() const;
    Json to_json() const;
    static BenchmarkConfig from_json(const Json& j);
};

struct ServiceSketch {
    std::string name;
    std::string description;
    friend bool operator==(const ServiceSketch&, const ServiceSketch&) = default;
};

struct EndpointSketch {
    std::string verb;
    std::string path;
    std::string description;
    EndpointId id() const { return EndpointId::make(verb, path); }
    friend bool operator==(const EndpointSketch&, const EndpointSketch&) = default;
};

struct QueryCase {
    std::string query;
    std::vector<EndpointId> expected;
    std::string domain;
    friend bool operator==(const QueryCase&, const QueryCase&) = default;
};

struct DomainBenchmark {
    std::string name;
    std::vector<ServiceDocument> services;
    std::vector<QueryCase> queries;

    /// All endpoints of all services, in service order.
    std::vector<EndpointId> endpoints() const;
};

struct BenchmarkInstance {
    std::size_t instance = 0;
    std::string fingerprint;       // config fingerprint of the producing run
    std::string template_version;  // prompt template version
    std::vector<DomainBenchmark> domains;

    const DomainBenchmark& domain(const std::string& name) const;
    std::size_t query_count() const;

    /// {instance, fingerprint, template_version, domains: [{name, services, queries}]}
    Json to_json() const;
};

/// Counts a well-formed instance must have; unset fields are not checked.
struct InstanceShape {
    std::optional<std::size_t> domains;
    std::optional<std::size_t> services_per_domain;
    std::optional<std::size_t> endpoints_per_service;
    std::optional<std::size_t> queries_per_domain;

    static InstanceShape from(const BenchmarkConfig& config);
};

/// Checks every instance invariant: counts per `shape`, nonempty expected
/// sets contained in the domain's endpoints, endpoint ids unique within a
/// domain, syntactically valid services and, when `embedder` is given,
/// pairwise query similarity below `s_threshold` within each domain.
std::vector<ValidationIssue> validate_instance(const BenchmarkInstance& instance, const InstanceShape& shape,
                                               EmbeddingProvider* embedder = nullptr,
                                               double s_threshold = 0.8);

/// Largest pairwise cosine similarity between the queries of one domain (0 for < 2 queries).
double max_pairwise_similarity(const std::vector<QueryCase>& queries, EmbeddingProvider& embedder);

/// Reads an instance file. Throws LoadError with a JSON location on schema
/// violations, queries with unknown or no expected endpoints, or a shape mismatch.
BenchmarkInstance instance_from_json(const Json& j, const InstanceShape& shape = {});
BenchmarkInstance load_instance(const std::filesystem::path& path, const InstanceShape& shape = {});
void save_instance(const std::filesystem::path& path, const BenchmarkInstance& instance);

struct RestBenchData {
    ServiceDocument service;
    std::vector<QueryCase> queries;
    std::vector<std::string> warnings;
};

/// Loads an OpenAPI document plus a query file of `[{"query", "solution": ["VERB /path", ...]}]`.
/// Path-only gold entries are read as GET and reported in `warnings`.
RestBenchData load_restbench(const std::filesystem::path& openapi_path,
                             const std::filesystem::path& queries_path, const std::string& name = "");

/// Expected-set size for one draw: round(N(mu, sigma)) clamped to [1, n_all].
std::size_t clamp_expected_size(double draw, std::size_t n_all);

/// Answers of the necessity check: case-insensitive yes/no on the first word.
/// Returns nullopt for anything else.
std::optional<bool> parse_yes_no(std::string_view answer);

/// Builds benchmark instances with a chat provider, checking each artifact
/// and checkpointing after every validated one. List and OpenAPI generation
/// get one attempt plus `budgets.regenerations` retries.
class BenchmarkGenerator {
public:
    BenchmarkGenerator(BenchmarkConfig config, ChatProvider& llm, EmbeddingProvider& embedder,
                       const PromptTemplates& templates = PromptTemplates::builtin());

    std::vector<ServiceSketch> create_services(const std::string& domain, std::size_t instance = 0);
    /// Endpoint lists colliding with `taken` (ids of sibling services) are regenerated.
    std::vector<EndpointSketch> create_endpoints(const std::string& domain, const ServiceSketch& service,
                                                 const std::vector<EndpointId>& taken = {});
    ServiceDocument create_openapi(const std::string& domain, const ServiceSketch& service,
                                   const std::vector<EndpointSketch>& endpoints);

    /// One query for `expected`, refined until the necessity check agrees with it.
    std::string create_query(const std::vector<ServiceDocument>& openapis,
                             const std::vector<EndpointId>& expected);
    std::vector<EndpointId> check_necessary(const std::vector<ServiceDocument>& openapis,
                                            const std::string& query,
                                            const std::vector<EndpointId>& extended);
    /// Fills `accepted` up to n_q queries. Each slot draws its expected set
    /// from an RNG seeded by (seed, instance, domain, slot, attempt).
    void create_queries(const std::string& domain, const std::vector<ServiceDocument>& openapis,
                        std::size_t instance, std::vector<QueryCase>& accepted,
                        const std::function<void()>& on_accept = {});

    /// Runs one instance. With a checkpoint directory, completed artifacts
    /// are read back from it and new ones written to it.
    BenchmarkInstance create_benchmark(std::size_t instance,
                                       const std::optional<std::filesystem::path>& checkpoint_dir = {});

    /// Fingerprint of the config, prompt version and both providers.
    std::string fingerprint() const;
    const BenchmarkConfig& config() const noexcept { return config_; }

private:
    DomainBenchmark create_domain(const std::string& domain, std::size_t instance,
                                  const std::optional<std::filesystem::path>& checkpoint_file);
    ChatResponse ask(const std::string& task, std::vector<ChatMessage> messages, Json context);

    BenchmarkConfig config_;
    ChatProvider& llm_;
    EmbeddingProvider& embedder_;
    const PromptTemplates& templates_;
};

/// Checkpoint file name of a domain: lowercase, non-alphanumerics as '-'.
std::string domain_slug(const std::string& domain);

}  // namespace svcdisc
