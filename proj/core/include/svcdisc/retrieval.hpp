// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "svcdisc/chunking.hpp"
#include "svcdisc/embedding.hpp"
#include "svcdisc/vector_index.hpp"

namespace svcdisc {

class ChatProvider;

struct RetrievalConfig {
    ChunkingStrategy strategy;
    ProviderConfig provider;
    std::size_t k = 5;

    void validate() const;
    Json to_json() const;
    static RetrievalConfig from_json(const Json& j);
};

struct RetrievalResult {
    std::vector<Chunk> chunks;          // ranked
    std::vector<double> scores;         // aligned with chunks
    std::vector<EndpointId> endpoints;  // deduplicated, first-occurrence order
    bool exhausted = false;             // CRAFT only: views ran out before k acceptances

    /// {query, candidate, chunks: [{score, endpoint_refs, content}], endpoints, exhausted}
    Json to_json(const std::string& query, const std::string& candidate_fingerprint) const;
};

/// Chunks every document under `strategy`; views with the same name are
/// concatenated in document order.
std::vector<ChunkView> chunk_corpus(const std::vector<ServiceDocument>& docs,
                                    const ChunkingStrategy& strategy, ChatProvider* llm = nullptr,
                                    DescribeOptions options = {});

/// Embeds each view's embedding inputs and stores them in one sealed index per view.
IndexSnapshot index_chunks(const std::vector<ChunkView>& views, const ChunkingStrategy& strategy,
                           EmbeddingProvider& provider);

/// chunk_corpus followed by index_chunks.
IndexSnapshot build_index(const std::vector<ServiceDocument>& docs, const ChunkingStrategy& strategy,
                          EmbeddingProvider& provider, ChatProvider* llm = nullptr,
                          DescribeOptions options = {});

/// Top-k chunks and their endpoints for an already embedded query.
RetrievalResult retrieve(const EmbeddingVector& query, std::size_t k, const FlatIndex& index);

/// Embeds `query` with `provider`, then retrieves. Throws ContractError when
/// the index was built with a different provider.
RetrievalResult retrieve(const std::string& query, std::size_t k, const FlatIndex& index,
                         EmbeddingProvider& provider);

/// Round-robin order over the three CRAFT views.
using CraftOrder = std::array<std::string, 3>;
inline const CraftOrder kDefaultCraftOrder = {"summary", "name", "description"};

struct CraftMerge {
    std::vector<EndpointId> accepted;  // acceptance order
    /// For each accepted endpoint, the 1-based append step that accepted it.
    std::vector<std::size_t> accepted_at;
    bool exhausted = false;
};

/// Merges three ranked endpoint lists: appends the next unseen endpoint of
/// each list in turn to that list's set and accepts an endpoint as soon as it
/// is in at least two sets. Stops at k acceptances or when every list is used up.
/// Throws ConfigError for k == 0.
CraftMerge craft_merge(const std::array<std::vector<EndpointId>, 3>& ranked, std::size_t k);

/// CRAFT retrieval over the "summary", "name" and "description" views of `snapshot`.
RetrievalResult craft_retrieve(const std::string& query, std::size_t k, const IndexSnapshot& snapshot,
                               EmbeddingProvider& provider, const CraftOrder& order = kDefaultCraftOrder);

/// Same, with an already embedded query and explicit view indexes.
RetrievalResult craft_retrieve(const EmbeddingVector& query, std::size_t k,
                               const std::array<const FlatIndex*, 3>& views);

/// Endpoints of every chunk in rank order, deduplicated (first occurrence wins).
std::vector<EndpointId> ranked_endpoints(const FlatIndex& index, const EmbeddingVector& query);

}  // namespace svcdisc
