// SPDX-License-Identifier: Apache-2.0
#include "svcdisc/grid.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <map>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "svcdisc/retrieval.hpp"
#include "svcdisc/tokenizer.hpp"

namespace svcdisc {

namespace {

constexpr std::size_t kEndpointWindow = 8191;

template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F&& fn) {
    if (n == 0) return;
    jobs = std::clamp<std::size_t>(jobs, 1, n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
    };
    std::vector<std::thread> threads;
    for (std::size_t j = 1; j < jobs; ++j) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
}

std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\n") == std::string::npos) return text;
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

Json k_json(std::size_t k) {
    return k == 0 ? Json("all") : Json(k);
}

struct ChunkSlot {
    std::vector<ChunkView> views;
    std::string error;
};

struct UnitResult {
    std::vector<std::vector<Metrics>> metrics;        // [k][query]
    std::vector<std::vector<std::size_t>> retrieved;  // [k][query]
    std::vector<std::size_t> token_counts;            // retrieved chunk sizes over all k and queries
    std::string error;
};

struct AgentUnit {
    std::vector<Metrics> metrics;
    std::vector<std::size_t> retrieved;
    std::vector<std::pair<std::size_t, std::string>> session_errors;
    TokenUsage usage;
    std::size_t model_calls = 0;
    std::string error;
};

std::vector<EndpointId> dedupe_endpoints(const std::vector<const Chunk*>& chunks) {
    std::vector<EndpointId> out;
    std::set<EndpointId> seen;
    for (const auto* c : chunks) {
        for (const auto& r : c->endpoint_refs) {
            if (seen.insert(r).second) out.push_back(r);
        }
    }
    return out;
}

}  // namespace

std::vector<ChunkingStrategy> standard_strategies() {
    return {
        ChunkingStrategy::from_name("no-split", 100, 0),
        ChunkingStrategy::from_name("no-split", 100, 20),
        ChunkingStrategy::from_name("no-split", 200, 0),
        ChunkingStrategy::from_name("no-split", 200, 20),
        ChunkingStrategy::from_name("json-split", 100, 0),
        ChunkingStrategy::from_name("json-split", 100, 20),
        ChunkingStrategy::from_name("endpoint-split", kEndpointWindow, 0),
        ChunkingStrategy::from_name("endpoint-split", kEndpointWindow, 20),
        ChunkingStrategy::from_name("remove-examples"),
        ChunkingStrategy::from_name("relevant-fields"),
        ChunkingStrategy::from_name("json-token", kEndpointWindow, 0),
        ChunkingStrategy::from_name("summary"),
        ChunkingStrategy::from_name("query"),
        ChunkingStrategy::from_name("craft"),
    };
}

void GridConfig::validate() const {
    if (models.empty()) throw ConfigError("grid needs at least one embedding model");
    std::set<std::string> names;
    for (const auto& m : models) {
        m.validate();
        if (!names.insert(m.model).second) throw ConfigError("embedding model '" + m.model + "' is listed twice");
    }
    if (ks.empty() && agent_ks.empty()) throw ConfigError("grid needs at least one k");
    for (auto k : ks) {
        if (k == 0) throw ConfigError("k must be at least 1");
    }
    if (!ks.empty() && strategies.empty()) throw ConfigError("grid needs at least one chunking strategy");
    std::set<std::string> labels;
    for (const auto& s : strategies) {
        s.validate();
        if (!labels.insert(s.label()).second) throw ConfigError("strategy " + s.label() + " is listed twice");
    }
    for (const auto& a : agent_ks) {
        if (a && *a == 0) throw ConfigError("agent k must be at least 1");
    }
    agent.validate();
    if (jobs == 0) throw ConfigError("jobs must be at least 1");
}

Json GridConfig::to_json() const {
    Json ms = Json::array(), ss = Json::array(), as = Json::array();
    for (const auto& m : models) ms.push_back(m.to_json());
    for (const auto& s : strategies) ss.push_back(s.to_json());
    for (const auto& a : agent_ks) as.push_back(a ? Json(*a) : Json("all"));
    return Json{{"models", std::move(ms)}, {"ks", ks}, {"strategies", std::move(ss)},
                {"agent_ks", std::move(as)}, {"agent", agent.to_json()}};
}

GridConfig GridConfig::from_json(const Json& j) {
    GridConfig g;
    if (auto it = j.find("models"); it != j.end()) {
        g.models.clear();
        for (const auto& m : *it) g.models.push_back(ProviderConfig::from_json(m));
    }
    if (auto it = j.find("ks"); it != j.end()) g.ks = it->get<std::vector<std::size_t>>();
    if (auto it = j.find("strategies"); it != j.end()) {
        g.strategies.clear();
        for (const auto& s : *it) {
            g.strategies.push_back(s.is_string() ? ChunkingStrategy::from_name(s.get<std::string>())
                                                 : ChunkingStrategy::from_json(s));
        }
    }
    if (auto it = j.find("agent_ks"); it != j.end()) {
        for (const auto& a : *it) {
            if (a.is_string() && a.get<std::string>() == "all") {
                g.agent_ks.push_back(std::nullopt);
            } else if (a.is_number_unsigned()) {
                g.agent_ks.push_back(a.get<std::size_t>());
            } else {
                throw ConfigError("agent_ks entries must be positive integers or \"all\"");
            }
        }
    }
    if (auto it = j.find("agent"); it != j.end()) g.agent = AgentConfig::from_json(*it);
    g.jobs = j.value("jobs", g.jobs);
    return g;
}

std::string GridReport::rows_csv() const {
    std::string out = fmt::format("# fingerprint: {}\n", fingerprint);
    out += "candidate,model,strategy,k,domain,query,recall,precision,retrieved\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{},{},{},{},{},{},{}\n", csv_field(r.candidate.id()), csv_field(r.candidate.model),
                           csv_field(r.candidate.strategy), r.candidate.k == 0 ? "all" : std::to_string(r.candidate.k),
                           csv_field(r.domain), r.query, r.recall, r.precision, r.retrieved);
    }
    return out;
}

Json GridReport::summary() const {
    Json cands = Json::array();
    for (const auto& c : candidates) cands.push_back(c.id());
    Json aggs = Json::array();
    for (const auto& a : aggregates) {
        auto j = a.candidate.to_json();
        j["recall"] = a.recall;
        j["precision"] = a.precision;
        j["domains"] = a.domains;
        aggs.push_back(std::move(j));
    }
    Json front = Json::array();
    for (const auto& p : pareto) front.push_back({{"candidate", p.tag}, {"recall", p.recall}, {"precision", p.precision}});
    Json fried = Json::array();
    for (const auto& f : friedman) {
        Json j{{"model", f.model}, {"k", k_json(f.k)}, {"domain", f.domain}};
        if (f.result) {
            const auto stats = f.result->to_json();
            for (const auto& [key, value] : stats.items()) j[key] = value;
            j["not_significant"] = f.result->p_value >= 0.05;
        } else {
            j["error"] = f.error;
        }
        fried.push_back(std::move(j));
    }
    Json toks = Json::array();
    for (const auto& t : tokens) toks.push_back({{"strategy", t.strategy}, {"mean_tokens", t.mean_tokens}, {"chunks", t.chunks}});
    Json usage = Json::array();
    for (const auto& u : agent_usage) {
        usage.push_back({{"candidate", u.candidate.id()},
                         {"sessions", u.sessions},
                         {"model_calls", u.model_calls},
                         {"prompt_tokens", u.usage.prompt},
                         {"completion_tokens", u.usage.completion}});
    }
    Json fails = Json::array();
    for (const auto& f : failures) {
        Json j{{"candidate", f.candidate.id()}, {"domain", f.domain}};
        if (f.query) j["query"] = *f.query;
        j["error"] = f.error;
        fails.push_back(std::move(j));
    }
    return Json{{"fingerprint", fingerprint},
                {"config", config},
                {"domains", domains},
                {"candidates", std::move(cands)},
                {"aggregates", std::move(aggs)},
                {"pareto", std::move(front)},
                {"stability", stability ? stability->to_json() : Json{{"error", stability_error}}},
                {"friedman", std::move(fried)},
                {"tokens", std::move(toks)},
                {"agent_usage", std::move(usage)},
                {"failures", std::move(fails)}};
}

void summarize_rows(GridReport& report) {
    report.aggregates.clear();
    report.pareto.clear();
    report.stability.reset();
    report.stability_error.clear();
    report.friedman.clear();
    if (report.rows.empty()) return;

    std::set<std::string> with_rows;
    for (const auto& r : report.rows) with_rows.insert(r.domain);
    std::vector<std::string> names;
    for (const auto& d : report.domains) {
        if (with_rows.contains(d)) names.push_back(d);
    }
    auto aggregates = aggregate_cross_domain(report.rows, names);
    // Grid order rather than the sorted order of the aggregation.
    for (const auto& c : report.candidates) {
        auto it = std::find_if(aggregates.begin(), aggregates.end(), [&](const Aggregate& a) { return a.candidate == c; });
        if (it != aggregates.end()) report.aggregates.push_back(*it);
    }
    std::vector<ParetoPoint> points;
    for (const auto& a : report.aggregates) points.push_back({a.candidate.id(), a.recall, a.precision});
    report.pareto = pareto_front(points);
    try {
        report.stability = stability(report.rows);
    } catch (const Error& e) {
        report.stability_error = e.what();
    }
    report.friedman = friedman_tables(report.rows, names);
}

std::string render_report_text(const GridReport& report) {
    std::string out = fmt::format("fingerprint: {}\ndomains: {}\ncandidates: {}\nrows: {}\n", report.fingerprint,
                                  report.domains.size(), report.candidates.size(), report.rows.size());

    out += "\n== Cross-domain averages (each domain weighted equally)\n";
    out += fmt::format("{:<48} {:>9} {:>9}\n", "candidate", "recall", "precision");
    for (const auto& a : report.aggregates) {
        out += fmt::format("{:<48} {:>9.4f} {:>9.4f}\n", a.candidate.id(), a.recall, a.precision);
    }

    out += "\n== Pareto front (recall, precision)\n";
    for (const auto& p : report.pareto) out += fmt::format("{:<48} {:>9.4f} {:>9.4f}\n", p.tag, p.recall, p.precision);

    out += "\n== Stability of recall across domains (population standard deviation)\n";
    if (report.stability) {
        auto section = [&](const char* title, const std::vector<StabilityEntry>& entries) {
            out += fmt::format("-- {}\n{:<20} {:<32} {:>5} {:>8} {:>8} {:>8}\n", title, "model", "strategy", "k", "mean",
                               "std", "cv");
            for (const auto& e : entries) {
                const auto k = e.k ? (*e.k == 0 ? std::string("all") : std::to_string(*e.k)) : std::string("*");
                out += fmt::format("{:<20} {:<32} {:>5} {:>8.4f} {:>8.4f} {:>8}\n", e.model, e.strategy, k, e.mean,
                                   e.stddev, e.cv ? fmt::format("{:.4f}", *e.cv) : std::string("n/a"));
            }
        };
        section("by model and strategy, all k pooled", report.stability->by_model_strategy);
        section("by model, strategy and k", report.stability->by_model_strategy_k);
    } else {
        out += "unavailable: " + report.stability_error + "\n";
    }

    out += "\n== Friedman test p-values across chunking strategies (* marks p >= 0.05)\n";
    std::vector<std::pair<std::string, std::size_t>> columns;
    std::vector<std::string> rows;
    std::map<std::pair<std::string, std::pair<std::string, std::size_t>>, std::string> cells;
    for (const auto& f : report.friedman) {
        const auto col = std::make_pair(f.model, f.k);
        if (std::find(columns.begin(), columns.end(), col) == columns.end()) columns.push_back(col);
        if (std::find(rows.begin(), rows.end(), f.domain) == rows.end()) rows.push_back(f.domain);
        cells[{f.domain, col}] = f.result ? fmt::format("{:.2f}{}", f.result->p_value,
                                                        f.result->significant() ? " " : "*")
                                          : std::string("-");
    }
    if (columns.empty()) {
        out += "no tests\n";
    } else {
        out += fmt::format("{:<28}", "domain");
        for (const auto& [model, k] : columns) out += fmt::format(" {:>14}", fmt::format("{} k={}", model, k));
        out += "\n";
        for (const auto& r : rows) {
            out += fmt::format("{:<28}", r);
            for (const auto& c : columns) out += fmt::format(" {:>14}", cells[{r, c}]);
            out += "\n";
        }
        for (const auto& f : report.friedman) {
            if (!f.result) out += fmt::format("note: {} k={} {}: {}\n", f.model, f.k, f.domain, f.error);
        }
    }

    out += "\n== Mean tokens per retrieved chunk, ascending\n";
    for (const auto& t : report.tokens) out += fmt::format("{:<32} {:>10.2f} {:>8}\n", t.strategy, t.mean_tokens, t.chunks);

    if (!report.agent_usage.empty()) {
        out += "\n== Agent token usage\n";
        for (const auto& u : report.agent_usage) {
            out += fmt::format("{:<48} sessions {} calls {} prompt {} completion {}\n", u.candidate.id(), u.sessions,
                               u.model_calls, u.usage.prompt, u.usage.completion);
        }
    }
    if (!report.failures.empty()) {
        out += "\n== Failures\n";
        for (const auto& f : report.failures) {
            out += fmt::format("{} [{}{}]: {}\n", f.candidate.id(), f.domain,
                               f.query ? fmt::format(" #{}", *f.query) : std::string(), f.error);
        }
    }
    return out;
}

std::vector<MetricsRow> read_rows_csv(std::istream& in, std::string* fingerprint) {
    std::vector<MetricsRow> rows;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line.rfind("# fingerprint: ", 0) == 0) {
            if (fingerprint != nullptr) *fingerprint = line.substr(15);
            continue;
        }
        if (line[0] == '#') continue;
        std::vector<std::string> fields(1);
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char c = line[i];
            if (quoted) {
                if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                    fields.back() += '"';
                    ++i;
                } else if (c == '"') {
                    quoted = false;
                } else {
                    fields.back() += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                fields.emplace_back();
            } else {
                fields.back() += c;
            }
        }
        const auto where = fmt::format("line {}", line_no);
        if (quoted) throw LoadError(where, "unterminated quote");
        if (fields.size() != 9) throw LoadError(where, fmt::format("has {} fields, expected 9", fields.size()));
        if (!header) {
            if (fields[0] != "candidate") throw LoadError(where, "missing header row");
            header = true;
            continue;
        }
        MetricsRow r;
        try {
            r.candidate.model = fields[1];
            r.candidate.strategy = fields[2];
            r.candidate.k = fields[3] == "all" ? 0 : std::stoul(fields[3]);
            r.domain = fields[4];
            r.query = std::stoul(fields[5]);
            r.recall = std::stod(fields[6]);
            r.precision = std::stod(fields[7]);
            r.retrieved = std::stoul(fields[8]);
        } catch (const std::logic_error&) {
            throw LoadError(where, "malformed number");
        }
        if (r.recall < 0 || r.recall > 1 || r.precision < 0 || r.precision > 1) {
            throw LoadError(where, "recall and precision must lie in [0, 1]");
        }
        rows.push_back(std::move(r));
    }
    if (!header) throw LoadError("line 1", "missing header row");
    return rows;
}

GridReport run_grid(const std::vector<DomainBenchmark>& domains, const GridConfig& config, ChatProvider* llm,
                    const std::string& fingerprint) {
    config.validate();
    if (domains.empty()) throw ConfigError("grid needs at least one domain");
    const std::size_t D = domains.size();
    const std::size_t M = config.models.size();
    const std::size_t K = config.ks.size();
    const std::size_t A = config.agent_ks.size();

    GridReport report;
    report.fingerprint = fingerprint;
    report.config = config.to_json();
    for (const auto& d : domains) report.domains.push_back(d.name);

    // Strategies to chunk: the grid's, plus summary chunks for the agent's search tool.
    auto strategies = config.strategies;
    std::size_t summary_slot = strategies.size();
    if (A > 0) {
        const auto summary = ChunkingStrategy::from_name("summary");
        auto it = std::find(strategies.begin(), strategies.end(), summary);
        summary_slot = static_cast<std::size_t>(it - strategies.begin());
        if (it == strategies.end()) strategies.push_back(summary);
    }
    const std::size_t S = strategies.size();
    const std::size_t S_grid = config.strategies.size();

    std::vector<ChunkSlot> chunks(D * S);
    parallel_for(D * S, config.jobs, [&](std::size_t i) {
        const auto& domain = domains[i / S];
        const auto& strategy = strategies[i % S];
        try {
            chunks[i].views = chunk_corpus(domain.services, strategy, llm);
        } catch (const std::exception& e) {
            chunks[i].error = fmt::format("chunking {} failed: {}", strategy.label(), e.what());
        }
    });

    std::vector<std::unique_ptr<EmbeddingProvider>> providers;
    for (const auto& m : config.models) providers.push_back(make_embedding_provider(m));

    std::vector<std::vector<EmbeddingVector>> query_vectors(M * D);
    std::vector<std::string> query_errors(M * D);
    parallel_for(M * D, config.jobs, [&](std::size_t i) {
        const auto& domain = domains[i % D];
        if (domain.queries.empty()) return;
        std::vector<std::string> texts;
        for (const auto& q : domain.queries) texts.push_back(q.query);
        try {
            query_vectors[i] = embed_texts(texts, *providers[i / D]);
        } catch (const std::exception& e) {
            query_errors[i] = fmt::format("embedding queries failed: {}", e.what());
        }
    });

    const std::size_t k_max = K == 0 ? 0 : *std::max_element(config.ks.begin(), config.ks.end());
    std::vector<UnitResult> units(M * S_grid * D);
    parallel_for(K == 0 ? 0 : units.size(), config.jobs, [&](std::size_t i) {
        const std::size_t m = i / (S_grid * D), s = (i / D) % S_grid, d = i % D;
        auto& out = units[i];
        const auto& domain = domains[d];
        const auto& strategy = strategies[s];
        try {
            if (!chunks[d * S + s].error.empty()) throw Error(chunks[d * S + s].error);
            if (!query_errors[m * D + d].empty()) throw Error(query_errors[m * D + d]);
            const auto snapshot = index_chunks(chunks[d * S + s].views, strategy, *providers[m]);
            const auto& qvs = query_vectors[m * D + d];
            out.metrics.assign(K, std::vector<Metrics>(domain.queries.size()));
            out.retrieved.assign(K, std::vector<std::size_t>(domain.queries.size()));
            if (strategy.refinement == Refinement::Craft) {
                const std::array<const FlatIndex*, 3> views = {&snapshot.view(kDefaultCraftOrder[0]),
                                                               &snapshot.view(kDefaultCraftOrder[1]),
                                                               &snapshot.view(kDefaultCraftOrder[2])};
                for (std::size_t q = 0; q < qvs.size(); ++q) {
                    for (std::size_t ki = 0; ki < K; ++ki) {
                        auto result = craft_retrieve(qvs[q], config.ks[ki], views);
                        out.metrics[ki][q] = recall_precision(domain.queries[q].expected, result.endpoints);
                        out.retrieved[ki][q] = result.endpoints.size();
                        for (const auto& c : result.chunks) out.token_counts.push_back(count_tokens(c.content));
                    }
                }
            } else {
                const auto& index = snapshot.view("main");
                std::vector<std::size_t> sizes(index.size());
                for (std::uint32_t id = 0; id < index.size(); ++id) sizes[id] = count_tokens(index.chunk(id).content);
                for (std::size_t q = 0; q < qvs.size(); ++q) {
                    // top_k orders by (score, id), so each smaller k is a prefix of the largest.
                    const auto hits = index.top_k(qvs[q], k_max);
                    for (std::size_t ki = 0; ki < K; ++ki) {
                        std::vector<const Chunk*> top;
                        for (std::size_t h = 0; h < std::min(config.ks[ki], hits.size()); ++h) {
                            top.push_back(&index.chunk(hits[h].id));
                            out.token_counts.push_back(sizes[hits[h].id]);
                        }
                        const auto endpoints = dedupe_endpoints(top);
                        out.metrics[ki][q] = recall_precision(domain.queries[q].expected, endpoints);
                        out.retrieved[ki][q] = endpoints.size();
                    }
                }
            }
        } catch (const std::exception& e) {
            out = UnitResult{};
            out.error = e.what();
        }
    });

    std::vector<AgentUnit> agent_units(M * A * D);
    parallel_for(agent_units.size(), config.jobs, [&](std::size_t i) {
        const std::size_t m = i / (A * D), a = (i / D) % A, d = i % D;
        auto& out = agent_units[i];
        const auto& domain = domains[d];
        try {
            if (llm == nullptr) throw ConfigError("agent candidates need a chat provider");
            if (!chunks[d * S + summary_slot].error.empty()) throw Error(chunks[d * S + summary_slot].error);
            const auto snapshot = index_chunks(chunks[d * S + summary_slot].views, strategies[summary_slot], *providers[m]);
            AgentConfig agent = config.agent;
            agent.k_per_search = config.agent_ks[a];
            const DiscoveryTools tools(snapshot.view("main"), domain.services, *providers[m], agent.k_per_search);
            for (std::size_t q = 0; q < domain.queries.size(); ++q) {
                std::vector<EndpointId> found;
                try {
                    auto result = run_agent(domain.queries[q].query, agent, tools, *llm);
                    found = std::move(result.endpoints);
                    out.usage += result.trace.usage;
                    out.model_calls += result.trace.model_calls;
                } catch (const AgentIterationLimit& e) {
                    out.usage += e.trace().usage;
                    out.model_calls += e.trace().model_calls;
                    out.session_errors.emplace_back(q, e.what());
                } catch (const AgentFormatError& e) {
                    out.usage += e.trace().usage;
                    out.model_calls += e.trace().model_calls;
                    out.session_errors.emplace_back(q, e.what());
                } catch (const Error& e) {
                    out.session_errors.emplace_back(q, e.what());
                }
                out.metrics.push_back(recall_precision(domain.queries[q].expected, found));
                out.retrieved.push_back(found.size());
            }
        } catch (const std::exception& e) {
            out = AgentUnit{};
            out.error = e.what();
        }
    });

    // Reduction, in grid order: model, strategy, k, then domain and query.
    std::map<std::string, std::vector<std::size_t>> token_counts;
    std::vector<std::string> token_order;
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t s = 0; s < S_grid; ++s) {
            bool failed = false;
            for (std::size_t d = 0; d < D; ++d) {
                const auto& u = units[(m * S_grid + s) * D + d];
                if (u.error.empty()) continue;
                failed = true;
                for (auto k : config.ks) {
                    report.failures.push_back({{config.models[m].model, k, strategies[s].label()}, domains[d].name,
                                               std::nullopt, u.error});
                }
            }
            if (failed) continue;
            auto& counts = token_counts[strategies[s].label()];
            if (std::find(token_order.begin(), token_order.end(), strategies[s].label()) == token_order.end()) {
                token_order.push_back(strategies[s].label());
            }
            for (std::size_t ki = 0; ki < K; ++ki) {
                GridCandidate c{config.models[m].model, config.ks[ki], strategies[s].label()};
                report.candidates.push_back(c);
                for (std::size_t d = 0; d < D; ++d) {
                    const auto& u = units[(m * S_grid + s) * D + d];
                    for (std::size_t q = 0; q < domains[d].queries.size(); ++q) {
                        report.rows.push_back({c, domains[d].name, q, u.metrics[ki][q].recall,
                                               u.metrics[ki][q].precision, u.retrieved[ki][q]});
                    }
                }
            }
            for (std::size_t d = 0; d < D; ++d) {
                const auto& u = units[(m * S_grid + s) * D + d];
                counts.insert(counts.end(), u.token_counts.begin(), u.token_counts.end());
            }
        }
        for (std::size_t a = 0; a < A; ++a) {
            AgentConfig agent = config.agent;
            agent.k_per_search = config.agent_ks[a];
            GridCandidate c{config.models[m].model, config.agent_ks[a].value_or(0), agent.label()};
            bool failed = false;
            for (std::size_t d = 0; d < D; ++d) {
                const auto& u = agent_units[(m * A + a) * D + d];
                if (!u.error.empty()) {
                    failed = true;
                    report.failures.push_back({c, domains[d].name, std::nullopt, u.error});
                }
            }
            if (failed) continue;
            report.candidates.push_back(c);
            AgentUsage usage{c, {}, 0, 0};
            for (std::size_t d = 0; d < D; ++d) {
                const auto& u = agent_units[(m * A + a) * D + d];
                for (std::size_t q = 0; q < u.metrics.size(); ++q) {
                    report.rows.push_back({c, domains[d].name, q, u.metrics[q].recall, u.metrics[q].precision,
                                           u.retrieved[q]});
                }
                for (const auto& [q, error] : u.session_errors) {
                    report.failures.push_back({c, domains[d].name, q, error});
                }
                usage.usage += u.usage;
                usage.sessions += u.metrics.size();
                usage.model_calls += u.model_calls;
            }
            report.agent_usage.push_back(usage);
        }
    }

    summarize_rows(report);

    std::vector<std::pair<std::string, std::vector<std::size_t>>> counts;
    for (const auto& label : token_order) {
        if (!token_counts[label].empty()) counts.emplace_back(label, std::move(token_counts[label]));
    }
    report.tokens = token_stats(counts);

    spdlog::info("grid: {} candidates, {} rows, {} failures", report.candidates.size(), report.rows.size(),
                 report.failures.size());
    return report;
}

}  // namespace svcdisc
