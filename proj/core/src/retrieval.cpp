// SPDX-License-Identifier: Apache-2.0
#include "svcdisc/retrieval.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>

#include "svcdisc/chat.hpp"
#include "svcdisc/error.hpp"

namespace svcdisc {

namespace {

void append_unique(std::vector<EndpointId>& out, std::set<EndpointId>& seen,
                   const std::vector<EndpointId>& refs) {
    for (const auto& r : refs) {
        if (seen.insert(r).second) out.push_back(r);
    }
}

}  // namespace

void RetrievalConfig::validate() const {
    strategy.validate();
    provider.validate();
    if (k == 0) throw ConfigError("k must be at least 1");
}

Json RetrievalConfig::to_json() const {
    return Json{{"strategy", strategy.to_json()}, {"provider", provider.to_json()}, {"k", k}};
}

RetrievalConfig RetrievalConfig::from_json(const Json& j) {
    RetrievalConfig c;
    if (j.contains("strategy")) c.strategy = ChunkingStrategy::from_json(j.at("strategy"));
    if (j.contains("provider")) c.provider = ProviderConfig::from_json(j.at("provider"));
    c.k = j.value("k", c.k);
    c.validate();
    return c;
}

Json RetrievalResult::to_json(const std::string& query, const std::string& candidate_fingerprint) const {
    Json ranked = Json::array();
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        Json refs = Json::array();
        for (const auto& r : chunks[i].endpoint_refs) refs.push_back(r.str());
        ranked.push_back({{"score", scores.at(i)},
                          {"service", chunks[i].source_service},
                          {"endpoint_refs", std::move(refs)},
                          {"content", chunks[i].content}});
    }
    Json eps = Json::array();
    for (const auto& e : endpoints) eps.push_back(e.str());
    return Json{{"query", query},
                {"candidate", candidate_fingerprint},
                {"chunks", std::move(ranked)},
                {"endpoints", std::move(eps)},
                {"exhausted", exhausted}};
}

std::vector<ChunkView> chunk_corpus(const std::vector<ServiceDocument>& docs,
                                    const ChunkingStrategy& strategy, ChatProvider* llm,
                                    DescribeOptions options) {
    std::vector<ChunkView> views;
    for (const auto& doc : docs) {
        for (auto& view : chunk_document(doc, strategy, llm, options)) {
            auto it = std::find_if(views.begin(), views.end(),
                                   [&](const auto& v) { return v.name == view.name; });
            if (it == views.end()) {
                views.push_back(std::move(view));
            } else {
                std::move(view.chunks.begin(), view.chunks.end(), std::back_inserter(it->chunks));
            }
        }
    }
    return views;
}

IndexSnapshot index_chunks(const std::vector<ChunkView>& views, const ChunkingStrategy& strategy,
                           EmbeddingProvider& provider) {
    IndexSnapshot snap;
    const auto sfp = strategy.fingerprint();
    const auto pfp = provider.config().fingerprint();
    for (const auto& view : views) {
        if (view.chunks.empty()) throw ValidationError("view '" + view.name + "' has no chunks");
        std::vector<std::string> inputs;
        inputs.reserve(view.chunks.size());
        for (const auto& c : view.chunks) inputs.push_back(c.embedding_input);
        auto vectors = embed_texts(inputs, provider);
        FlatIndex index(provider.config().dimension, sfp, pfp);
        index.insert(std::move(vectors), view.chunks);
        index.seal();
        snap.views.push_back({view.name, std::move(index)});
    }
    return snap;
}

IndexSnapshot build_index(const std::vector<ServiceDocument>& docs, const ChunkingStrategy& strategy,
                          EmbeddingProvider& provider, ChatProvider* llm, DescribeOptions options) {
    return index_chunks(chunk_corpus(docs, strategy, llm, options), strategy, provider);
}

RetrievalResult retrieve(const EmbeddingVector& query, std::size_t k, const FlatIndex& index) {
    RetrievalResult result;
    std::set<EndpointId> seen;
    for (const auto& hit : index.top_k(query, k)) {
        const auto& chunk = index.chunk(hit.id);
        result.chunks.push_back(chunk);
        result.scores.push_back(hit.score);
        append_unique(result.endpoints, seen, chunk.endpoint_refs);
    }
    return result;
}

RetrievalResult retrieve(const std::string& query, std::size_t k, const FlatIndex& index,
                         EmbeddingProvider& provider) {
    const auto pfp = provider.config().fingerprint();
    if (!index.provider_fingerprint().empty() && index.provider_fingerprint() != pfp) {
        throw ContractError(fmt::format("index was built with provider {}, query uses {}",
                                        index.provider_fingerprint(), pfp));
    }
    if (index.size() == 0) throw StateError("index is empty");
    return retrieve(embed_texts({query}, provider).front(), k, index);
}

std::vector<EndpointId> ranked_endpoints(const FlatIndex& index, const EmbeddingVector& query) {
    std::vector<EndpointId> out;
    std::set<EndpointId> seen;
    for (const auto& hit : index.top_k(query, index.size())) {
        append_unique(out, seen, index.chunk(hit.id).endpoint_refs);
    }
    return out;
}

CraftMerge craft_merge(const std::array<std::vector<EndpointId>, 3>& ranked, std::size_t k) {
    if (k == 0) throw ConfigError("k must be at least 1");
    CraftMerge merge;
    std::array<std::set<EndpointId>, 3> sets;
    std::array<std::size_t, 3> cursor{0, 0, 0};
    std::set<EndpointId> accepted;
    std::size_t step = 0;

    auto next = [&](std::size_t v) -> const EndpointId* {
        while (cursor[v] < ranked[v].size()) {
            const auto& e = ranked[v][cursor[v]++];
            if (!sets[v].contains(e)) return &e;
        }
        return nullptr;
    };

    while (merge.accepted.size() < k) {
        bool appended = false;
        for (std::size_t v = 0; v < 3 && merge.accepted.size() < k; ++v) {
            const EndpointId* e = next(v);
            if (e == nullptr) continue;
            appended = true;
            ++step;
            sets[v].insert(*e);
            if (accepted.contains(*e)) continue;
            int present = 0;
            for (const auto& s : sets) present += s.contains(*e) ? 1 : 0;
            if (present >= 2) {
                accepted.insert(*e);
                merge.accepted.push_back(*e);
                merge.accepted_at.push_back(step);
            }
        }
        if (!appended) {
            merge.exhausted = true;
            break;
        }
    }
    return merge;
}

RetrievalResult craft_retrieve(const EmbeddingVector& query, std::size_t k,
                               const std::array<const FlatIndex*, 3>& views) {
    if (k == 0) throw ConfigError("k must be at least 1");
    std::array<std::vector<EndpointId>, 3> ranked;
    for (std::size_t v = 0; v < 3; ++v) {
        if (views[v] == nullptr) throw NotFoundError("missing CRAFT view index");
        ranked[v] = ranked_endpoints(*views[v], query);
    }
    auto merge = craft_merge(ranked, k);

    // Content for an accepted endpoint comes from the first view that has a
    // chunk for it; its score is the best score over the three views.
    std::map<EndpointId, std::pair<const Chunk*, double>> best;
    for (const auto* index : views) {
        for (std::uint32_t id = 0; id < index->size(); ++id) {
            const auto& chunk = index->chunk(id);
            double s = index->score(query, id);
            for (const auto& ref : chunk.endpoint_refs) {
                auto it = best.find(ref);
                if (it == best.end()) {
                    best.emplace(ref, std::make_pair(&chunk, s));
                } else {
                    it->second.second = std::max(it->second.second, s);
                }
            }
        }
    }

    RetrievalResult result;
    result.endpoints = merge.accepted;
    result.exhausted = merge.exhausted;
    for (const auto& e : merge.accepted) {
        const auto& [chunk, score] = best.at(e);
        result.chunks.push_back(*chunk);
        result.scores.push_back(score);
    }
    return result;
}

RetrievalResult craft_retrieve(const std::string& query, std::size_t k, const IndexSnapshot& snapshot,
                               EmbeddingProvider& provider, const CraftOrder& order) {
    std::array<const FlatIndex*, 3> views{};
    for (std::size_t v = 0; v < 3; ++v) {
        views[v] = &snapshot.view(order[v]);
        if (!views[v]->provider_fingerprint().empty() &&
            views[v]->provider_fingerprint() != provider.config().fingerprint()) {
            throw ContractError("CRAFT view '" + order[v] + "' was built with a different provider");
        }
    }
    return craft_retrieve(embed_texts({query}, provider).front(), k, views);
}

}  // namespace svcdisc
