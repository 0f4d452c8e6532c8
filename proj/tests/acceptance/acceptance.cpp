// SPDX-License-Identifier: Apache-2.0
// Prints one PASS/FAIL line per acceptance criterion; exits 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "oracles.hpp"
#include "svcdisc/agent.hpp"
#include "svcdisc/benchmark.hpp"
#include "svcdisc/chunking.hpp"
#include "svcdisc/cli.hpp"
#include "svcdisc/error.hpp"
#include "svcdisc/evaluation.hpp"
#include "svcdisc/grid.hpp"
#include "svcdisc/retrieval.hpp"
#include "svcdisc/statistics.hpp"
#include "svcdisc/tokenizer.hpp"
#include "svcdisc/vector_index.hpp"
#include "test_support.hpp"

using namespace svcdisc;
using namespace svcdisc::testing;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and limits.
constexpr double kTopKSeconds = 5.0;
constexpr double kAggregateTol = 1e-12;
constexpr double kFriedmanTol = 1e-9;
constexpr double kSimilarityThreshold = 0.8;
constexpr double kGridSeconds = 120.0;

struct Failure {
    std::string what;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw Failure{what};
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string join_ids(const std::vector<EndpointId>& ids) {
    std::string out;
    for (const auto& id : ids) out += (out.empty() ? "" : ", ") + id.str();
    return "[" + out + "]";
}

// ---------------------------------------------------------------------------

std::string criterion1() {
    constexpr std::size_t kCount = 1000, kDim = 64, kProbes = 100;
    std::mt19937_64 rng(20240601);
    std::normal_distribution<double> normal;
    auto random_unit = [&] {
        std::vector<double> v(kDim);
        for (auto& x : v) x = normal(rng);
        return normalized(v);
    };

    const auto start = Clock::now();
    FlatIndex index(kDim);
    std::vector<std::vector<float>> raw;
    for (std::size_t i = 0; i < kCount; ++i) {
        auto v = random_unit();
        raw.push_back(v.values);
        Chunk c;
        c.content = c.embedding_input = fmt::format("chunk {}", i);
        index.insert(std::move(v), std::move(c));
    }
    index.seal();
    std::size_t compared = 0;
    for (std::size_t p = 0; p < kProbes; ++p) {
        const auto q = random_unit();
        for (std::size_t k : {5, 10, 20}) {
            const auto got = index.top_k(q, k);
            const auto want = brute_force_top_k(raw, q.values, k);
            require(got.size() == want.size(), fmt::format("probe {} k={}: size {}", p, k, got.size()));
            for (std::size_t i = 0; i < got.size(); ++i) {
                require(got[i].id == want[i].id && got[i].score == want[i].score,
                        fmt::format("probe {} k={} rank {}: id {} score {} vs id {} score {}", p, k, i, got[i].id,
                                    got[i].score, want[i].id, want[i].score));
            }
            ++compared;
        }
    }
    const double t = seconds_since(start);
    require(t < kTopKSeconds, fmt::format("took {:.2f}s", t));
    return fmt::format("{} probe/k comparisons exact, {:.2f}s", compared, t);
}

// ---------------------------------------------------------------------------

// Consecutive windows of one intermediate chunk: all but the last hold exactly
// `s` tokens, each holds at most `s`, and neighbours share exactly `l` tokens.
void check_windows(const std::vector<Chunk>& windows, std::size_t s, std::size_t l, const std::string& where) {
    const auto tok = default_tokenizer();
    std::vector<std::vector<TokenId>> ids;
    for (const auto& w : windows) ids.push_back(tok->encode(w.content));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        require(ids[i].size() <= s, fmt::format("{} window {}: {} tokens > {}", where, i, ids[i].size(), s));
        require(count_tokens(windows[i].content) == ids[i].size(), where + ": count_tokens disagrees");
        if (i + 1 < ids.size()) {
            require(ids[i].size() == s, fmt::format("{} window {}: {} tokens, not final", where, i, ids[i].size()));
            const auto& a = ids[i];
            const auto& b = ids[i + 1];
            require(b.size() >= l && std::equal(a.end() - static_cast<std::ptrdiff_t>(l), a.end(), b.begin()),
                    fmt::format("{} windows {}/{}: overlap is not {}", where, i, i + 1, l));
        }
    }
}

std::string criterion2(const BenchmarkInstance& instance) {
    const auto endpoint_split = ChunkingStrategy::from_name("endpoint-split", 8191, 0);
    for (const auto& d : instance.domains) {
        const auto views = chunk_corpus(d.services, endpoint_split);
        require(views.size() == 1 && views[0].chunks.size() == 50,
                fmt::format("{}: {} endpoint-split chunks", d.name, views.empty() ? 0 : views[0].chunks.size()));
    }

    std::vector<ChunkingStrategy> windowed;
    for (const auto& s : standard_strategies()) {
        if (s.uses_token_windows()) windowed.push_back(s);
    }
    windowed.push_back(ChunkingStrategy::from_name("endpoint-split", 48, 12));
    windowed.push_back(ChunkingStrategy::from_name("json-split", 30, 29));
    windowed.push_back(ChunkingStrategy::from_name("no-split", 57, 0));

    std::size_t windows = 0;
    for (const auto& strategy : windowed) {
        if (strategy.refinement == Refinement::JsonSplitTokenChunking) continue;  // windows per leaf group
        for (const auto& d : instance.domains) {
            for (const auto& svc : d.services) {
                const auto chunks = chunk_document(svc, strategy).at(0).chunks;
                std::size_t cursor = 0;
                for (const auto& inter : split(svc, strategy.splitting)) {
                    const auto n = window_ranges(count_tokens(inter.text), strategy.chunk_size, strategy.overlap).size();
                    require(cursor + n <= chunks.size(), strategy.label() + ": fewer chunks than windows");
                    std::vector<Chunk> group(chunks.begin() + static_cast<std::ptrdiff_t>(cursor),
                                             chunks.begin() + static_cast<std::ptrdiff_t>(cursor + n));
                    check_windows(group, strategy.chunk_size, strategy.overlap,
                                  fmt::format("{} {}", strategy.label(), svc.title));
                    cursor += n;
                    windows += n;
                }
                require(cursor == chunks.size(), strategy.label() + ": more chunks than windows");
            }
        }
    }
    // json-token windows: bounded by s
    const auto json_token = ChunkingStrategy::from_name("json-token", 40, 0);
    for (const auto& svc : instance.domains.front().services) {
        const auto views = chunk_document(svc, json_token);
        for (const auto& c : views.at(0).chunks) {
            require(count_tokens(c.content) <= 40, "json-token window above s");
        }
    }
    return fmt::format("{} domains x 50 chunks; {} windows checked for size and overlap", instance.domains.size(),
                       windows);
}

// ---------------------------------------------------------------------------

EndpointId ep(int i) { return EndpointId::make("GET", fmt::format("/e{}", i)); }

// One-chunk-per-endpoint index in dimension 2 whose scores against (1, 0)
// strictly decrease along `ranking`.
FlatIndex ranked_view(const std::vector<EndpointId>& ranking) {
    FlatIndex index(2);
    for (std::size_t r = 0; r < ranking.size(); ++r) {
        const double angle = 0.05 + 0.1 * static_cast<double>(r);
        Chunk c;
        c.content = c.embedding_input = ranking[r].str();
        c.endpoint_refs = {ranking[r]};
        index.insert(normalized({std::cos(angle), std::sin(angle)}), std::move(c));
    }
    index.seal();
    return index;
}

std::string criterion3() {
    auto ids = [](std::initializer_list<int> xs) {
        std::vector<EndpointId> v;
        for (int x : xs) v.push_back(ep(x));
        return v;
    };
    struct Fixture {
        std::string name;
        std::array<std::vector<EndpointId>, 3> views;
    };
    const std::vector<Fixture> fixtures = {
        {"identical", {ids({1, 2, 3, 4, 5, 6}), ids({1, 2, 3, 4, 5, 6}), ids({1, 2, 3, 4, 5, 6})}},
        {"disjoint", {ids({1, 2, 3}), ids({4, 5, 6}), ids({7, 8, 9})}},
        {"permuted", {ids({1, 2, 3, 4, 5, 6}), ids({6, 5, 4, 3, 2, 1}), ids({3, 1, 5, 2, 6, 4})}},
        {"rotated", {ids({1, 2, 3, 4, 5}), ids({2, 3, 4, 5, 1}), ids({3, 4, 5, 1, 2})}},
        {"partial", {ids({1, 2, 3, 4}), ids({5, 6, 1}), ids({7, 2, 8})}},
    };

    // worked example: identical views, k = 2 -> e1 at step 2, e2 at step 5
    const auto example = craft_merge(fixtures[0].views, 2);
    require(example.accepted == ids({1, 2}) && example.accepted_at == std::vector<std::size_t>{2, 5},
            "identical views, k=2: " + join_ids(example.accepted));

    const EmbeddingVector query{{1.0f, 0.0f}};
    std::size_t cases = 0;
    for (const auto& f : fixtures) {
        const auto a = ranked_view(f.views[0]), b = ranked_view(f.views[1]), c = ranked_view(f.views[2]);
        for (std::size_t k = 1; k <= 10; ++k) {
            const auto sim = simulate_craft(f.views, k);
            const auto got = craft_retrieve(query, k, {&a, &b, &c});
            require(got.endpoints == sim.accepted,
                    fmt::format("{} k={}: {} vs simulated {}", f.name, k, join_ids(got.endpoints),
                                join_ids(sim.accepted)));
            require(got.exhausted == sim.exhausted, fmt::format("{} k={}: exhaustion flag", f.name, k));
            const auto merge = craft_merge(f.views, k);
            require(merge.accepted_at == sim.accepted_at, fmt::format("{} k={}: acceptance steps", f.name, k));
            ++cases;
        }
    }
    require(craft_merge(fixtures[1].views, 3).accepted.empty(), "disjoint views accepted something");
    return fmt::format("{} fixture/k cases match the step-by-step simulation", cases);
}

// ---------------------------------------------------------------------------

BenchmarkConfig generation_config() {
    BenchmarkConfig config;
    config.seed = 7;
    config.instances = 1;
    config.parallelism = 4;
    return config;
}

// Uninterrupted mock generation over all eleven sectors, shared by criteria 2, 4 and 8.
const BenchmarkInstance& reference_instance() {
    static const BenchmarkInstance instance = [] {
        const auto config = generation_config();
        MockChatProvider mock(config.seed);
        DeterministicLocalProvider embedder(ProviderConfig{});
        return BenchmarkGenerator(config, mock, embedder).create_benchmark(0);
    }();
    return instance;
}

std::string criterion4() {
    const auto config = generation_config();
    MockChatProvider mock(config.seed);
    DeterministicLocalProvider embedder(ProviderConfig{});
    const auto& reference = reference_instance();

    const auto issues = validate_instance(reference, InstanceShape::from(config), &embedder, kSimilarityThreshold);
    if (!issues.empty()) {
        throw Failure{fmt::format("{} issues, first: {}: {}", issues.size(), issues[0].location, issues[0].message)};
    }
    require(reference.domains.size() == 11, "domain count");
    double worst = 0.0;
    for (const auto& d : reference.domains) {
        require(d.services.size() == 5, d.name + ": service count");
        for (const auto& s : d.services) require(s.endpoints.size() == 10, d.name + ": endpoint count");
        require(d.queries.size() == 10, d.name + ": query count");
        const auto all = d.endpoints();
        for (const auto& q : d.queries) {
            require(!q.expected.empty(), d.name + ": empty expected set");
            for (const auto& e : q.expected) {
                require(std::find(all.begin(), all.end(), e) != all.end(), d.name + ": foreign endpoint " + e.str());
            }
        }
        const double sim = max_pairwise_similarity(d.queries, embedder);
        require(sim < kSimilarityThreshold, fmt::format("{}: query similarity {}", d.name, sim));
        worst = std::max(worst, sim);
    }

    // interrupt half-way, then resume from the checkpoint
    FailingAfter counter(mock, static_cast<std::size_t>(-1));
    BenchmarkGenerator(config, counter, embedder).create_benchmark(0);
    const std::size_t total_calls = counter.calls();

    TempDir dir;
    FailingAfter interrupted(mock, total_calls / 2);
    bool resumable = false;
    try {
        BenchmarkGenerator(config, interrupted, embedder).create_benchmark(0, dir.path());
    } catch (const ResumableError&) {
        resumable = true;
    }
    require(resumable, "interrupted run did not raise a resumable error");
    FailingAfter resumed_llm(mock, static_cast<std::size_t>(-1));
    const auto resumed = BenchmarkGenerator(config, resumed_llm, embedder).create_benchmark(0, dir.path());
    require(resumed_llm.calls() < total_calls, "resume did not reuse the checkpoint");
    require(canonical_serialize(resumed.to_json()) == canonical_serialize(reference.to_json()),
            "resumed instance differs from the uninterrupted one");
    return fmt::format("11 domains, 5x10 endpoints, 10 queries each, max similarity {:.3f}; resumed after {}/{} "
                       "calls with {} more, identical",
                       worst, total_calls / 2, total_calls, resumed_llm.calls());
}

// ---------------------------------------------------------------------------

std::string criterion5() {
    auto ids = [](std::initializer_list<int> xs) {
        std::vector<EndpointId> v;
        for (int x : xs) v.push_back(ep(x));
        return v;
    };
    struct Case {
        std::vector<EndpointId> expected, retrieved;
        double recall, precision;
    };
    // hand-computed: recall = |E ∩ R| / |E|, precision = |E ∩ R| / |R| over sets
    const std::vector<Case> cases = {
        {ids({1}), ids({1}), 1.0, 1.0},
        {ids({1}), ids({2}), 0.0, 0.0},
        {ids({1}), {}, 0.0, 0.0},
        {ids({1, 2}), ids({1}), 0.5, 1.0},
        {ids({1, 2}), ids({1, 2, 3, 4}), 1.0, 0.5},
        {ids({1, 2, 3}), ids({1, 4, 5}), 1.0 / 3.0, 1.0 / 3.0},
        {ids({1, 2, 3}), ids({3, 2}), 2.0 / 3.0, 1.0},
        {ids({1, 2, 3, 4}), ids({1, 2, 3, 4, 5}), 1.0, 0.8},
        {ids({1, 2, 3, 4}), ids({5, 6, 7, 8}), 0.0, 0.0},
        {ids({1, 2, 3, 4, 5}), ids({1, 2}), 0.4, 1.0},
        {ids({1, 1, 2}), ids({1}), 0.5, 1.0},
        {ids({1}), ids({1, 1, 1}), 1.0, 1.0},
        {ids({1, 2}), ids({2, 2, 3}), 0.5, 0.5},
        {ids({1, 2, 3, 4, 5, 6}), ids({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}), 1.0, 0.6},
        {ids({1, 2, 3, 4, 5, 6}), ids({6, 7, 8, 9, 10, 11, 12, 13, 14, 15}), 1.0 / 6.0, 0.1},
        {ids({7}), ids({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20}), 1.0, 0.05},
        {ids({1, 2, 3}), ids({1, 2, 3}), 1.0, 1.0},
        {ids({1, 2, 3}), ids({4, 1, 5, 2, 6, 3, 7}), 1.0, 3.0 / 7.0},
        {ids({2, 4, 6, 8}), ids({1, 2, 3}), 0.25, 1.0 / 3.0},
        {ids({1, 3, 5, 7, 9}), ids({9, 7, 5, 2, 4, 6}), 0.6, 0.5},
    };
    require(cases.size() == 20, "fixture count");
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto m = recall_precision(cases[i].expected, cases[i].retrieved);
        require(m.recall == cases[i].recall && m.precision == cases[i].precision,
                fmt::format("case {}: got ({}, {}), want ({}, {})", i, m.recall, m.precision, cases[i].recall,
                            cases[i].precision));
    }

    // aggregation: three domains with 3, 7 and 12 queries, two candidates
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unit;
    const std::vector<std::pair<std::string, std::size_t>> domains = {{"D1", 3}, {"D2", 7}, {"D3", 12}};
    std::vector<MetricsRow> rows;
    for (const std::string strategy : {"s1", "s2"}) {
        for (const auto& [domain, n] : domains) {
            for (std::size_t q = 0; q < n; ++q) {
                rows.push_back({{"m", 5, strategy}, domain, q, unit(rng), unit(rng), 5});
            }
        }
    }
    const auto aggregates = aggregate_cross_domain(rows);
    require(aggregates.size() == 2, "aggregate count");
    double worst = 0.0;
    for (const auto& a : aggregates) {
        double recall = 0.0, precision = 0.0;
        for (const auto& [domain, n] : domains) {
            double r = 0.0, p = 0.0;
            for (const auto& row : rows) {
                if (row.candidate == a.candidate && row.domain == domain) {
                    r += row.recall;
                    p += row.precision;
                }
            }
            recall += r / static_cast<double>(n) / 3.0;
            precision += p / static_cast<double>(n) / 3.0;
        }
        worst = std::max({worst, std::abs(a.recall - recall), std::abs(a.precision - precision)});
    }
    require(worst <= kAggregateTol, fmt::format("aggregate deviation {}", worst));

    // Friedman against the reference formula
    const std::vector<std::vector<std::vector<double>>> tables = {
        {{1, 2, 3}, {1, 3, 2}, {2, 1, 3}, {1, 2, 3}, {3, 2, 1}},
        {{0.5, 0.5, 1.0, 0.0}, {1.0, 1.0, 1.0, 0.5}, {0.2, 0.4, 0.4, 0.4}, {0.0, 0.0, 0.5, 0.5}},
        {{0.1, 0.9}, {0.2, 0.8}, {0.3, 0.7}, {0.6, 0.4}, {0.0, 1.0}, {0.5, 0.5}},
        {{1, 1, 1}, {0, 0, 0}, {0.5, 0.5, 0.5}},
        {{0.25, 0.75, 0.5, 1.0, 0.0}, {0.3, 0.3, 0.6, 0.9, 0.1}, {1, 1, 1, 0, 0}, {0.2, 0.4, 0.6, 0.8, 1.0},
         {0.9, 0.1, 0.9, 0.1, 0.5}, {0.5, 0.5, 0.5, 0.5, 0.25}, {0.0, 0.2, 0.2, 0.4, 0.6}},
    };
    double friedman_worst = 0.0;
    for (std::size_t t = 0; t < tables.size(); ++t) {
        const auto r = friedman(tables[t]);
        const double ref = conover_friedman(tables[t]);
        friedman_worst = std::max(friedman_worst, std::abs(r.statistic - ref));
        require(std::abs(r.statistic - ref) <= kFriedmanTol,
                fmt::format("table {}: statistic {} vs reference {}", t, r.statistic, ref));
    }
    const auto ties = friedman(tables[3]);
    require(ties.statistic == 0.0 && ties.p_value == 1.0,
            fmt::format("all-ties table: statistic {} p {}", ties.statistic, ties.p_value));
    return fmt::format("20 recall/precision cases exact; aggregate deviation {:.1e}; Friedman deviation {:.1e} on "
                       "5 tables, all-ties gives (0, 1)",
                       worst, friedman_worst);
}

// ---------------------------------------------------------------------------

int run_cli(std::vector<std::string> args, std::string* output = nullptr) {
    std::ostringstream out, err;
    const int code = cli::dispatch(args, out, err);
    if (output) *output = out.str() + err.str();
    return code;
}

std::string criterion6() {
    TempDir dir;
    const auto instance = planted_instance();
    save_instance(dir / "planted.json", instance);
    write_file(dir / "script.json", canonical_serialize(planted_summary_script(instance)));
    const Json config = {{"llm", {{"kind", "scripted"}, {"script", (dir / "script.json").string()}}},
                         {"grid", {{"ks", {3, 5, 10}}, {"strategies", {"summary"}}}}};
    write_file(dir / "config.json", canonical_serialize(config));

    std::string log;
    const int code = run_cli({"--config", (dir / "config.json").string(), "--benchmark",
                              (dir / "planted.json").string(), "--out", (dir / "run").string(), "bench", "run"},
                             &log);
    require(code == 0, fmt::format("bench run exited {}: {}", code, log));

    std::istringstream csv(read_file(dir / "run" / "rows.csv"));
    const auto rows = read_rows_csv(csv);
    std::size_t checked = 0;
    for (const auto& row : rows) {
        const auto& q = instance.domain(row.domain).queries.at(row.query);
        const std::size_t e = q.expected.size(), k = row.candidate.k;
        require(k >= e, "planted sets exceed k");
        require(row.recall == 1.0, fmt::format("{} q{} k={}: recall {}", row.domain, row.query, k, row.recall));
        const double want = k > e ? static_cast<double>(e) / static_cast<double>(k) : 1.0;
        require(row.precision == want,
                fmt::format("{} q{} k={}: precision {} want {}", row.domain, row.query, k, row.precision, want));
        ++checked;
    }
    require(checked == 2 * 5 * 3, fmt::format("{} rows", checked));
    return fmt::format("{} planted query/k rows: recall 1, precision |E|/k", checked);
}

// ---------------------------------------------------------------------------

std::string criterion7() {
    const std::vector<ServiceDocument> docs = {
        make_service("Orders", "Order handling.",
                     {{"GET", "/orders", "List orders placed by customers."},
                      {"POST", "/orders", "Place a new order for a customer."},
                      {"GET", "/orders/{orderId}", "Fetch a single order."},
                      {"DELETE", "/orders/{orderId}", "Cancel an order."}}),
        make_service("Inventory", "Stock levels.",
                     {{"GET", "/stock", "Show current stock levels per warehouse."},
                      {"PUT", "/stock/{sku}", "Set the stock level of a product."},
                      {"GET", "/warehouses", "List warehouses."}}),
    };
    MockChatProvider describer;
    DeterministicLocalProvider embedder(ProviderConfig{});
    const auto snapshot = build_index(docs, ChunkingStrategy::from_name("summary"), embedder, &describer);
    const std::string query = "place an order for a customer";
    DiscoveryTools tools(snapshot.view("main"), docs, embedder, 2);

    const auto hits = tools.search(query);
    require(hits.size() == 2, "search size");
    std::vector<EndpointId> surfaced;
    for (const auto& [id, _] : hits) surfaced.push_back(id);
    const EndpointId detailed = EndpointId::make("GET", "/warehouses");
    require(std::find(surfaced.begin(), surfaced.end(), detailed) == surfaced.end(), "detailed endpoint surfaced");
    // an Orders endpoint no tool call returns
    std::optional<EndpointId> unseen;
    for (const auto& id : docs[0].endpoint_ids()) {
        if (!unseen && std::find(surfaced.begin(), surfaced.end(), id) == surfaced.end()) unseen = id;
    }
    require(unseen.has_value(), "every Orders endpoint surfaced");
    const EndpointId hidden = *unseen;
    auto lower = [](std::string_view v) {
        std::string out(v);
        std::transform(out.begin(), out.end(), out.begin(), ::tolower);
        return out;
    };

    // answer with odd spacing and lowercase verbs to exercise canonicalization
    std::string answer = "ENDPOINTS:\n";
    answer += fmt::format("  {}   {}\n", lower(hidden.verb()), hidden.path());
    for (const auto& id : surfaced) answer += fmt::format("{}  {}\n", lower(id.verb()), id.path());
    answer += "get /warehouses\n" + surfaced.front().str() + "\n";
    const Json script = Json::array({
        {{"task", tasks::kAgent}, {"tool_calls", {{{"name", kSearchTool}, {"arguments", {{"query", query}}}}}}},
        {{"task", tasks::kAgent},
         {"tool_calls", {{{"name", kDetailsTool}, {"arguments", {{"verb", "GET"}, {"path", "/warehouses"}}}}}}},
        {{"task", tasks::kAgent}, {"content", answer}},
    });

    AgentConfig config;
    config.k_per_search = 2;
    ScriptedChatProvider first(script);
    const auto result = run_agent(query, config, tools, first);
    std::vector<EndpointId> want = surfaced;
    want.push_back(detailed);
    require(result.endpoints == want, "final " + join_ids(result.endpoints) + " want " + join_ids(want));
    require(result.trace.dropped == std::vector<EndpointId>{hidden}, "dropped " + join_ids(result.trace.dropped));
    std::vector<std::string> tools_used;
    for (const auto& s : result.trace.steps) tools_used.push_back(s.tool);
    require(tools_used == std::vector<std::string>{kSearchTool, kDetailsTool, "final"}, "step sequence");

    ScriptedChatProvider second(script);
    const auto rerun = run_agent(query, config, tools, second);
    require(rerun.trace == result.trace, "rerun trace differs");
    require(canonical_serialize(rerun.trace.to_json()) == canonical_serialize(result.trace.to_json()),
            "rerun trace JSON differs");

    // iteration limit
    Json looping = Json::array();
    for (int i = 0; i < 5; ++i) {
        looping.push_back({{"tool_calls", {{{"name", kSearchTool}, {"arguments", {{"query", "stock"}}}}}}});
    }
    AgentConfig limited = config;
    limited.max_iterations = 3;
    ScriptedChatProvider loop_llm(looping);
    bool limit_fired = false;
    try {
        run_agent("stock", limited, tools, loop_llm);
    } catch (const AgentIterationLimit& e) {
        limit_fired = e.trace().model_calls == 3 && e.trace().steps.size() == 3;
    }
    require(limit_fired, "iteration limit did not fire after 3 calls");
    require(loop_llm.remaining() == 2, "model called after the limit");

    // malformed final answer
    ScriptedChatProvider bad(Json::array({{{"content", "I would use GET /stock"}}}));
    bool format_fired = false;
    try {
        run_agent("stock", config, tools, bad);
    } catch (const AgentFormatError& e) {
        format_fired = e.raw() == "I would use GET /stock" && e.trace().steps.size() == 1;
    }
    require(format_fired, "format error did not fire");
    return "search -> details -> final gives the canonical set, 1 unsurfaced dropped; limit and format errors fire; "
           "rerun trace identical";
}

// ---------------------------------------------------------------------------

std::string criterion8(const BenchmarkInstance& instance) {
    TempDir dir;
    save_instance(dir / "instance.json", instance);
    const Json config = {{"grid",
                          {{"models",
                            {{{"kind", "deterministic-local"}, {"model", "hash-bigram"}, {"dimension", 256}},
                             {{"kind", "deterministic-local"}, {"model", "hash-trigram"}, {"dimension", 128}}}}}}};
    write_file(dir / "config.json", canonical_serialize(config));

    const std::size_t m = 2, k = 3, s = standard_strategies().size();
    std::vector<std::string> files[2];
    double slowest = 0.0;
    for (int run = 0; run < 2; ++run) {
        const auto out = dir / fmt::format("run{}", run);
        const auto start = Clock::now();
        std::string log;
        const int code = run_cli({"--config", (dir / "config.json").string(), "--mock-providers", "--jobs", "4",
                                  "--benchmark", (dir / "instance.json").string(), "--out", out.string(), "bench",
                                  "run"},
                                 &log);
        slowest = std::max(slowest, seconds_since(start));
        require(code == 0, fmt::format("bench run exited {}: {}", code, log));
        for (const char* name : {"rows.csv", "summary.json", "report.txt"}) {
            files[run].push_back(read_file(out / name));
        }
    }
    require(slowest < kGridSeconds, fmt::format("grid run took {:.1f}s", slowest));
    require(files[0] == files[1], "reruns differ");

    std::istringstream csv(files[0][0]);
    const auto rows = read_rows_csv(csv);
    std::map<std::pair<std::string, std::size_t>, std::size_t> per_query;
    for (const auto& r : rows) ++per_query[{r.domain, r.query}];
    require(per_query.size() == instance.query_count(), fmt::format("{} queries in rows", per_query.size()));
    for (const auto& [q, n] : per_query) {
        require(n == m * k * s, fmt::format("{} q{}: {} rows, want {}", q.first, q.second, n, m * k * s));
    }
    return fmt::format("{} rows per query = {}x{}x{}, {} queries, reruns byte-identical, slowest run {:.1f}s",
                       m * k * s, m, k, s, per_query.size(), slowest);
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::warn);
    int failures = 0;
    auto run = [&](int id, const std::function<std::string()>& check) {
        std::string detail;
        bool ok = false;
        try {
            detail = check();
            ok = true;
        } catch (const Failure& f) {
            detail = f.what;
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        if (!ok) ++failures;
        std::cout << fmt::format("criterion {}: {} - {}", id, ok ? "PASS" : "FAIL", detail) << std::endl;
    };
    run(1, criterion1);
    run(2, [] { return criterion2(reference_instance()); });
    run(3, criterion3);
    run(4, criterion4);
    run(5, criterion5);
    run(6, criterion6);
    run(7, criterion7);
    run(8, [] { return criterion8(reference_instance()); });
    return failures == 0 ? 0 : 1;
}
