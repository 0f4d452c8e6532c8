// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "svcdisc/json.hpp"
#include "svcdisc/openapi.hpp"

namespace svcdisc {

class ChatProvider;

enum class Splitting { NoSplit, EndpointSplit, JsonSplit };

enum class Refinement {
    TokenChunking,
    RemoveExamples,
    RelevantFields,
    JsonSplitTokenChunking,
    Summary,
    Query,
    Craft,
};

/// A (splitting, refinement) pair plus the token-window parameters used by the
/// token-chunking refinements. The embedding model is part of ProviderConfig.
struct ChunkingStrategy {
    Splitting splitting = Splitting::EndpointSplit;
    Refinement refinement = Refinement::TokenChunking;
    std::size_t chunk_size = 0;  // s, token-chunking refinements only
    std::size_t overlap = 0;     // l, 0 <= l < s

    bool uses_token_windows() const noexcept {
        return refinement == Refinement::TokenChunking ||
               refinement == Refinement::JsonSplitTokenChunking;
    }
    bool uses_llm() const noexcept {
        return refinement == Refinement::Summary || refinement == Refinement::Query ||
               refinement == Refinement::Craft;
    }

    /// Throws ConfigError for invalid pairings or window parameters.
    void validate() const;

    /// Human-readable, unique name, e.g. "endpoint-split/token(100,20)".
    std::string label() const;
    Json to_json() const;
    static ChunkingStrategy from_json(const Json& j);
    /// Stable hash of the strategy fields.
    std::string fingerprint() const;

    /// Builds a strategy from a short name (no-split, json-split,
    /// endpoint-split, remove-examples, relevant-fields, json-token, summary,
    /// query, craft) and the window parameters.
    static ChunkingStrategy from_name(std::string_view name, std::size_t chunk_size = 0,
                                      std::size_t overlap = 0);

    friend bool operator==(const ChunkingStrategy&, const ChunkingStrategy&) = default;
};

struct IntermediateChunk {
    std::string text;
    std::vector<EndpointId> endpoint_refs;
};

struct Chunk {
    std::string content;          // goes into prompts
    std::string embedding_input;  // what the embedding model sees
    std::vector<EndpointId> endpoint_refs;
    std::string source_service;

    Json to_json() const;
    static Chunk from_json(const Json& j);
    friend bool operator==(const Chunk&, const Chunk&) = default;
};

/// One retrievable chunk set. Every strategy yields a single view named
/// "main" except CRAFT, which yields "summary", "name" and "description".
struct ChunkView {
    std::string name;
    std::vector<Chunk> chunks;
};

/// Bounds concurrent LLM calls made by the Summary, Query and CRAFT refinements.
struct DescribeOptions {
    std::size_t parallelism = 1;
};

/// Depth-first leaf lines: the key chain joined by single spaces, then the
/// scalar value (strings unquoted, array indices used as keys).
std::vector<std::string> json_leaf_lines(const Json& value);

/// Splitting step. NoSplit: one chunk with the whole (inlined) document.
/// EndpointSplit: one chunk per endpoint. JsonSplit: leaf lines grouped per
/// path item. Throws ValidationError for a document without endpoints.
std::vector<IntermediateChunk> split(const ServiceDocument& doc, Splitting method);

/// Drops `requestBody` and every `examples` key at any depth.
Endpoint remove_examples(const Endpoint& endpoint);

/// Five labeled lines: title, service description, verb, path, description.
std::string relevant_fields(const ServiceDocument& doc, const Endpoint& endpoint);

enum class DescribeMode { Summary, Query };

/// Asks the LLM for an endpoint summary or a matching user query.
/// Throws ContentError for an empty completion.
std::string llm_describe(const Endpoint& endpoint, DescribeMode mode, ChatProvider& llm);

/// True when `path` occurs in `text` with no path character directly before or after it.
bool contains_path(std::string_view text, std::string_view path);

/// Applies splitting then refinement. LLM-based refinements require `llm`.
/// Throws ConfigError for invalid strategies.
std::vector<ChunkView> chunk_document(const ServiceDocument& doc, const ChunkingStrategy& strategy,
                                      ChatProvider* llm = nullptr, DescribeOptions options = {});

/// Endpoints whose description was empty when building a CRAFT description
/// view; their endpoint name was used instead.
std::vector<EndpointId> craft_description_fallbacks(const ServiceDocument& doc);

/// One JSON record per line: service, view, endpoint_refs, content,
/// embedding_input, strategy.
void write_chunks_jsonl(std::ostream& out, const std::vector<ChunkView>& views,
                        const ChunkingStrategy& strategy);
std::vector<ChunkView> read_chunks_jsonl(std::istream& in);

}  // namespace svcdisc
