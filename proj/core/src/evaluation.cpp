// SPDX-License-Identifier: Apache-2.0
#include "svcdisc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "svcdisc/error.hpp"

namespace svcdisc {

namespace {

struct Mean {
    double sum = 0.0;
    std::size_t n = 0;
    void add(double v) {
        sum += v;
        ++n;
    }
    double value() const { return n == 0 ? 0.0 : sum / static_cast<double>(n); }
};

StabilityEntry summarize(std::string model, std::string strategy, std::optional<std::size_t> k,
                         const std::map<std::string, Mean>& per_domain) {
    if (per_domain.size() < 2) {
        throw ValidationError(fmt::format("stability of {}|{} needs at least 2 domains, got {}", model, strategy,
                                          per_domain.size()));
    }
    StabilityEntry e{std::move(model), std::move(strategy), k, 0.0, 0.0, std::nullopt, per_domain.size()};
    Mean mean;
    for (const auto& [_, m] : per_domain) mean.add(m.value());
    e.mean = mean.value();
    double ss = 0.0;
    for (const auto& [_, m] : per_domain) ss += (m.value() - e.mean) * (m.value() - e.mean);
    e.stddev = std::sqrt(ss / static_cast<double>(per_domain.size()));
    if (e.mean != 0.0) e.cv = e.stddev / e.mean;
    return e;
}

}  // namespace

std::string GridCandidate::id() const {
    return fmt::format("{}|{}|{}", model, strategy, k == 0 ? std::string("all") : std::to_string(k));
}

Json GridCandidate::to_json() const {
    return Json{{"id", id()}, {"model", model}, {"strategy", strategy}, {"k", k == 0 ? Json("all") : Json(k)}};
}

Metrics recall_precision(const std::vector<EndpointId>& expected, const std::vector<EndpointId>& retrieved) {
    const std::set<EndpointId> want(expected.begin(), expected.end());
    if (want.empty()) throw ConfigError("expected endpoint set is empty");
    const std::set<EndpointId> got(retrieved.begin(), retrieved.end());
    std::size_t hits = 0;
    for (const auto& id : got) hits += want.contains(id) ? 1 : 0;
    Metrics m;
    m.recall = static_cast<double>(hits) / static_cast<double>(want.size());
    m.precision = got.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(got.size());
    return m;
}

std::vector<Aggregate> aggregate_cross_domain(const std::vector<MetricsRow>& rows,
                                              const std::vector<std::string>& domains) {
    std::map<GridCandidate, std::map<std::string, std::pair<Mean, Mean>>> groups;
    std::set<std::string> seen_domains;
    for (const auto& r : rows) {
        auto& [recall, precision] = groups[r.candidate][r.domain];
        recall.add(r.recall);
        precision.add(r.precision);
        seen_domains.insert(r.domain);
    }
    const std::vector<std::string> required =
        domains.empty() ? std::vector<std::string>(seen_domains.begin(), seen_domains.end()) : domains;

    std::vector<Aggregate> out;
    for (const auto& [candidate, per_domain] : groups) {
        Mean recall, precision;
        for (const auto& d : required) {
            auto it = per_domain.find(d);
            if (it == per_domain.end()) {
                throw ValidationError(fmt::format("candidate {} has no rows for domain '{}'", candidate.id(), d));
            }
            recall.add(it->second.first.value());
            precision.add(it->second.second.value());
        }
        out.push_back({candidate, recall.value(), precision.value(), required.size()});
    }
    return out;
}

Json StabilityEntry::to_json() const {
    return Json{{"model", model},
                {"strategy", strategy},
                {"k", k ? Json(*k == 0 ? Json("all") : Json(*k)) : Json("pooled")},
                {"mean_recall", mean},
                {"stddev", stddev},
                {"cv", cv ? Json(*cv) : Json(nullptr)},
                {"domains", domains}};
}

Json StabilitySummary::to_json() const {
    Json a = Json::array(), b = Json::array();
    for (const auto& e : by_model_strategy) a.push_back(e.to_json());
    for (const auto& e : by_model_strategy_k) b.push_back(e.to_json());
    return Json{{"stddev", "population standard deviation over per-domain mean recall"},
                {"by_model_strategy", std::move(a)},
                {"by_model_strategy_k", std::move(b)}};
}

StabilitySummary stability(const std::vector<MetricsRow>& rows) {
    using Pooled = std::tuple<std::string, std::string>;
    using PerK = std::tuple<std::string, std::string, std::size_t>;
    std::map<Pooled, std::map<std::string, Mean>> pooled;
    std::map<PerK, std::map<std::string, Mean>> per_k;
    for (const auto& r : rows) {
        pooled[{r.candidate.model, r.candidate.strategy}][r.domain].add(r.recall);
        per_k[{r.candidate.model, r.candidate.strategy, r.candidate.k}][r.domain].add(r.recall);
    }
    StabilitySummary out;
    for (const auto& [key, domains] : pooled) {
        out.by_model_strategy.push_back(summarize(std::get<0>(key), std::get<1>(key), std::nullopt, domains));
    }
    for (const auto& [key, domains] : per_k) {
        out.by_model_strategy_k.push_back(summarize(std::get<0>(key), std::get<1>(key), std::get<2>(key), domains));
    }
    return out;
}

std::vector<ParetoPoint> pareto_front(const std::vector<ParetoPoint>& points) {
    std::vector<ParetoPoint> front;
    for (const auto& p : points) {
        const bool dominated = std::any_of(points.begin(), points.end(), [&](const ParetoPoint& q) {
            return q.recall >= p.recall && q.precision >= p.precision &&
                   (q.recall > p.recall || q.precision > p.precision);
        });
        if (!dominated) front.push_back(p);
    }
    return front;
}

std::vector<TokenStat> token_stats(const std::vector<std::pair<std::string, std::vector<std::size_t>>>& counts) {
    std::vector<TokenStat> out;
    for (const auto& [strategy, chunks] : counts) {
        if (chunks.empty()) throw ConfigError("strategy '" + strategy + "' has no chunks");
        Mean m;
        for (auto c : chunks) m.add(static_cast<double>(c));
        out.push_back({strategy, m.value(), chunks.size()});
    }
    std::stable_sort(out.begin(), out.end(), [](const TokenStat& a, const TokenStat& b) {
        return std::tie(a.mean_tokens, a.strategy) < std::tie(b.mean_tokens, b.strategy);
    });
    return out;
}

bool is_agent_candidate(const GridCandidate& candidate) {
    return candidate.strategy.rfind("agent(", 0) == 0;
}

std::vector<FriedmanEntry> friedman_tables(const std::vector<MetricsRow>& rows,
                                           const std::vector<std::string>& domains) {
    using Block = std::pair<std::size_t, std::size_t>;  // (domain position, query)
    struct Group {
        std::vector<std::string> strategies;
        std::map<std::string, std::map<Block, double>> recall;
    };
    std::map<std::string, std::size_t> domain_pos;
    for (std::size_t d = 0; d < domains.size(); ++d) domain_pos.emplace(domains[d], d);
    std::vector<std::pair<std::string, std::size_t>> order;
    std::map<std::pair<std::string, std::size_t>, Group> groups;
    for (const auto& r : rows) {
        if (is_agent_candidate(r.candidate)) continue;
        auto pos = domain_pos.find(r.domain);
        if (pos == domain_pos.end()) throw ValidationError("row for unknown domain '" + r.domain + "'");
        const auto key = std::make_pair(r.candidate.model, r.candidate.k);
        auto [it, fresh] = groups.try_emplace(key);
        if (fresh) order.push_back(key);
        auto& g = it->second;
        if (!g.recall.contains(r.candidate.strategy)) g.strategies.push_back(r.candidate.strategy);
        g.recall[r.candidate.strategy][{pos->second, r.query}] = r.recall;
    }

    std::vector<FriedmanEntry> out;
    for (const auto& key : order) {
        const auto& g = groups.at(key);
        std::set<Block> blocks;
        for (const auto& [_, values] : g.recall) {
            for (const auto& [b, __] : values) blocks.insert(b);
        }
        auto test = [&](const std::string& label, std::optional<std::size_t> domain) {
            FriedmanEntry entry{key.first, key.second, label, std::nullopt, {}};
            std::vector<std::vector<double>> table;
            for (const auto& b : blocks) {
                if (domain && b.first != *domain) continue;
                std::vector<double> row;
                for (const auto& s : g.strategies) {
                    const auto& values = g.recall.at(s);
                    auto v = values.find(b);
                    row.push_back(v == values.end() ? std::nan("") : v->second);
                }
                table.push_back(std::move(row));
            }
            try {
                if (g.strategies.size() < 2) {
                    throw ConfigError(fmt::format("Friedman test needs at least 2 treatments, got {}",
                                                  g.strategies.size()));
                }
                entry.result = friedman(table);
            } catch (const Error& e) {
                entry.error = e.what();
            }
            out.push_back(std::move(entry));
        };
        for (std::size_t d = 0; d < domains.size(); ++d) test(domains[d], d);
        test("All", std::nullopt);
    }
    return out;
}

}  // namespace svcdisc
