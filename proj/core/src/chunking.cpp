// SPDX-License-Identifier: Apache-2.0
#include "svcdisc/chunking.hpp"

#include <algorithm>
#include <future>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "svcdisc/chat.hpp"
#include "svcdisc/error.hpp"
#include "svcdisc/hashing.hpp"
#include "svcdisc/prompts.hpp"
#include "svcdisc/tokenizer.hpp"

namespace svcdisc {

namespace {

struct NamedPair {
    Splitting splitting;
    Refinement refinement;
    const char* short_name;
};

constexpr NamedPair kStrategyNames[] = {
    {Splitting::NoSplit, Refinement::TokenChunking, "no-split"},
    {Splitting::JsonSplit, Refinement::TokenChunking, "json-split"},
    {Splitting::EndpointSplit, Refinement::TokenChunking, "endpoint-split"},
    {Splitting::EndpointSplit, Refinement::RemoveExamples, "remove-examples"},
    {Splitting::EndpointSplit, Refinement::RelevantFields, "relevant-fields"},
    {Splitting::EndpointSplit, Refinement::JsonSplitTokenChunking, "json-token"},
    {Splitting::EndpointSplit, Refinement::Summary, "summary"},
    {Splitting::EndpointSplit, Refinement::Query, "query"},
    {Splitting::EndpointSplit, Refinement::Craft, "craft"},
};

const char* splitting_name(Splitting s) {
    switch (s) {
        case Splitting::NoSplit: return "no-split";
        case Splitting::EndpointSplit: return "endpoint-split";
        case Splitting::JsonSplit: return "json-split";
    }
    return "";
}

const char* refinement_name(Refinement r) {
    switch (r) {
        case Refinement::TokenChunking: return "token";
        case Refinement::RemoveExamples: return "remove-examples";
        case Refinement::RelevantFields: return "relevant-fields";
        case Refinement::JsonSplitTokenChunking: return "json-token";
        case Refinement::Summary: return "summary";
        case Refinement::Query: return "query";
        case Refinement::Craft: return "craft";
    }
    return "";
}

Splitting splitting_from(const std::string& s) {
    for (auto v : {Splitting::NoSplit, Splitting::EndpointSplit, Splitting::JsonSplit}) {
        if (s == splitting_name(v)) return v;
    }
    throw ConfigError("unknown splitting method '" + s + "'");
}

Refinement refinement_from(const std::string& s) {
    for (auto v : {Refinement::TokenChunking, Refinement::RemoveExamples, Refinement::RelevantFields,
                   Refinement::JsonSplitTokenChunking, Refinement::Summary, Refinement::Query,
                   Refinement::Craft}) {
        if (s == refinement_name(v)) return v;
    }
    throw ConfigError("unknown refinement '" + s + "'");
}

bool is_path_char(char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || c == '_' || c == '-' || c == '.' || c == '~' || c == '%' ||
           c == '{' || c == '}' || c == '/';
}

std::size_t find_path(std::string_view text, std::string_view path, std::size_t from = 0) {
    if (path.empty()) return std::string_view::npos;
    for (auto pos = text.find(path, from); pos != std::string_view::npos;
         pos = text.find(path, pos + 1)) {
        bool left_ok = pos == 0 || !is_path_char(text[pos - 1]);
        auto end = pos + path.size();
        bool right_ok = end >= text.size() || !is_path_char(text[end]);
        if (left_ok && right_ok) return pos;
    }
    return std::string_view::npos;
}

std::string scalar_text(const Json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

void collect_leaves(const Json& node, std::vector<std::string>& keys, std::vector<std::string>& out) {
    auto emit = [&](const Json& leaf) {
        std::string line;
        for (const auto& k : keys) {
            line += k;
            line += ' ';
        }
        line += scalar_text(leaf);
        out.push_back(std::move(line));
    };
    if (node.is_object()) {
        for (const auto& [k, child] : node.items()) {
            keys.push_back(k);
            collect_leaves(child, keys, out);
            keys.pop_back();
        }
    } else if (node.is_array()) {
        for (std::size_t i = 0; i < node.size(); ++i) {
            keys.push_back(std::to_string(i));
            collect_leaves(node[i], keys, out);
            keys.pop_back();
        }
    } else if (!keys.empty()) {
        emit(node);
    } else {
        out.push_back(scalar_text(node));
    }
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out += '\n';
        out += lines[i];
    }
    return out;
}

void strip_examples(Json& node) {
    if (node.is_object()) {
        node.erase("examples");
        for (auto& [k, child] : node.items()) strip_examples(child);
    } else if (node.is_array()) {
        for (auto& child : node) strip_examples(child);
    }
}

std::string one_line(std::string_view s) {
    std::string out(s);
    std::replace(out.begin(), out.end(), '\n', ' ');
    std::replace(out.begin(), out.end(), '\r', ' ');
    return out;
}

Chunk make_chunk(std::string content, std::string embedding_input, std::vector<EndpointId> refs,
                 const std::string& service) {
    Chunk c;
    c.content = std::move(content);
    c.embedding_input = std::move(embedding_input);
    c.endpoint_refs = std::move(refs);
    c.source_service = service;
    return c;
}

// Token windows over a multi-endpoint intermediate chunk. A window references
// every endpoint whose path it contains. Windows that contain no path fall back
// to the endpoints whose text region they overlap (regions start at the first
// occurrence of an endpoint's path), and an endpoint whose path was cut by
// every window is attached to the window where its path starts.
std::vector<Chunk> multi_endpoint_windows(const IntermediateChunk& chunk, std::size_t size,
                                          std::size_t overlap, const std::string& service) {
    auto seq = encode(chunk.text);
    auto ranges = window_ranges(seq.size(), size, overlap);

    std::vector<std::size_t> offsets(seq.size() + 1, 0);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        offsets[i + 1] = offsets[i] + seq.decoder->decode(std::span(&seq.tokens[i], 1)).size();
    }

    struct Anchor {
        std::size_t pos;
        EndpointId id;
    };
    std::vector<Anchor> anchors;
    for (const auto& id : chunk.endpoint_refs) {
        auto pos = find_path(chunk.text, id.path());
        anchors.push_back({pos == std::string_view::npos ? 0 : pos, id});
    }
    std::stable_sort(anchors.begin(), anchors.end(),
                     [](const Anchor& a, const Anchor& b) { return a.pos < b.pos; });

    auto region_end = [&](std::size_t i) {
        for (std::size_t j = i + 1; j < anchors.size(); ++j) {
            if (anchors[j].pos > anchors[i].pos) return anchors[j].pos;
        }
        return chunk.text.size();
    };

    std::vector<Chunk> out;
    std::vector<std::set<EndpointId>> refs(ranges.size());
    for (std::size_t w = 0; w < ranges.size(); ++w) {
        auto [tb, te] = ranges[w];
        std::size_t cb = offsets[tb], ce = offsets[te];
        std::string_view text(chunk.text.data() + cb, ce - cb);
        for (const auto& id : chunk.endpoint_refs) {
            if (find_path(text, id.path()) != std::string_view::npos) refs[w].insert(id);
        }
        if (refs[w].empty()) {
            for (std::size_t i = 0; i < anchors.size(); ++i) {
                std::size_t rb = i == 0 ? 0 : anchors[i].pos;
                if (rb < ce && region_end(i) > cb) refs[w].insert(anchors[i].id);
            }
        }
    }
    for (const auto& a : anchors) {
        bool reachable = std::any_of(refs.begin(), refs.end(),
                                     [&](const auto& r) { return r.contains(a.id); });
        if (reachable || ranges.empty()) continue;
        std::size_t w = 0;
        while (w + 1 < ranges.size() && offsets[ranges[w].second] <= a.pos) ++w;
        refs[w].insert(a.id);
    }

    for (std::size_t w = 0; w < ranges.size(); ++w) {
        auto [tb, te] = ranges[w];
        std::string text = chunk.text.substr(offsets[tb], offsets[te] - offsets[tb]);
        std::vector<EndpointId> ordered;
        for (const auto& id : chunk.endpoint_refs) {
            if (refs[w].contains(id)) ordered.push_back(id);
        }
        out.push_back(make_chunk(text, text, std::move(ordered), service));
    }
    return out;
}

std::vector<Chunk> single_endpoint_windows(const std::string& text, const EndpointId& id,
                                           std::size_t size, std::size_t overlap,
                                           const std::string& service) {
    std::vector<Chunk> out;
    for (const auto& window : window_split(encode(text), size, overlap)) {
        auto t = window.text();
        out.push_back(make_chunk(t, t, {id}, service));
    }
    return out;
}

std::vector<std::string> describe_all(const std::vector<Endpoint>& endpoints, DescribeMode mode,
                                      ChatProvider& llm, std::size_t parallelism) {
    std::vector<std::string> out(endpoints.size());
    if (parallelism <= 1) {
        for (std::size_t i = 0; i < endpoints.size(); ++i) out[i] = llm_describe(endpoints[i], mode, llm);
        return out;
    }
    for (std::size_t start = 0; start < endpoints.size(); start += parallelism) {
        std::vector<std::future<std::string>> wave;
        auto end = std::min(endpoints.size(), start + parallelism);
        for (std::size_t i = start; i < end; ++i) {
            wave.push_back(std::async(std::launch::async,
                                      [&, i] { return llm_describe(endpoints[i], mode, llm); }));
        }
        for (std::size_t i = start; i < end; ++i) out[i] = wave[i - start].get();
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// ChunkingStrategy

void ChunkingStrategy::validate() const {
    if (splitting != Splitting::EndpointSplit && refinement != Refinement::TokenChunking) {
        throw ConfigError(fmt::format("{} can only be refined with token chunking, not {}",
                                      splitting_name(splitting), refinement_name(refinement)));
    }
    if (uses_token_windows()) {
        if (chunk_size == 0) throw ConfigError(label() + ": chunk size must be positive");
        if (overlap >= chunk_size) {
            throw ConfigError(fmt::format("{}: overlap {} must be smaller than chunk size {}",
                                          label(), overlap, chunk_size));
        }
    }
}

std::string ChunkingStrategy::label() const {
    if (refinement == Refinement::TokenChunking) {
        return fmt::format("{}/token({},{})", splitting_name(splitting), chunk_size, overlap);
    }
    if (refinement == Refinement::JsonSplitTokenChunking) {
        return fmt::format("{}/json-token({},{})", splitting_name(splitting), chunk_size, overlap);
    }
    return fmt::format("{}/{}", splitting_name(splitting), refinement_name(refinement));
}

Json ChunkingStrategy::to_json() const {
    Json j;
    j["splitting"] = splitting_name(splitting);
    j["refinement"] = refinement_name(refinement);
    j["chunk_size"] = uses_token_windows() ? chunk_size : 0;
    j["overlap"] = uses_token_windows() ? overlap : 0;
    return j;
}

ChunkingStrategy ChunkingStrategy::from_json(const Json& j) {
    ChunkingStrategy s;
    if (j.contains("name")) {
        s = from_name(j.at("name").get<std::string>(), j.value("chunk_size", std::size_t{0}),
                      j.value("overlap", std::size_t{0}));
    } else {
        s.splitting = splitting_from(j.at("splitting").get<std::string>());
        s.refinement = refinement_from(j.at("refinement").get<std::string>());
        s.chunk_size = j.value("chunk_size", std::size_t{0});
        s.overlap = j.value("overlap", std::size_t{0});
        if (!s.uses_token_windows()) s.chunk_size = s.overlap = 0;
    }
    s.validate();
    return s;
}

std::string ChunkingStrategy::fingerprint() const {
    return fingerprint_of(to_json());
}

ChunkingStrategy ChunkingStrategy::from_name(std::string_view name, std::size_t chunk_size,
                                             std::size_t overlap) {
    for (const auto& n : kStrategyNames) {
        if (name == n.short_name) {
            ChunkingStrategy s;
            s.splitting = n.splitting;
            s.refinement = n.refinement;
            if (s.uses_token_windows()) {
                s.chunk_size = chunk_size;
                s.overlap = overlap;
            }
            s.validate();
            return s;
        }
    }
    std::string names;
    for (const auto& n : kStrategyNames) names += std::string(names.empty() ? "" : ", ") + n.short_name;
    throw ConfigError(fmt::format("unknown strategy '{}'; expected one of: {}", name, names));
}

// ---------------------------------------------------------------------------
// Chunk

Json Chunk::to_json() const {
    Json refs = Json::array();
    for (const auto& r : endpoint_refs) refs.push_back(r.str());
    return Json{{"service", source_service},
                {"endpoint_refs", std::move(refs)},
                {"content", content},
                {"embedding_input", embedding_input}};
}

Chunk Chunk::from_json(const Json& j) {
    Chunk c;
    c.source_service = j.at("service").get<std::string>();
    for (const auto& r : j.at("endpoint_refs")) c.endpoint_refs.push_back(EndpointId::parse(r.get<std::string>()));
    c.content = j.at("content").get<std::string>();
    c.embedding_input = j.at("embedding_input").get<std::string>();
    return c;
}

// ---------------------------------------------------------------------------
// Splitting and refinements

std::vector<std::string> json_leaf_lines(const Json& value) {
    std::vector<std::string> keys, out;
    collect_leaves(value, keys, out);
    return out;
}

bool contains_path(std::string_view text, std::string_view path) {
    return find_path(text, path) != std::string_view::npos;
}

std::vector<IntermediateChunk> split(const ServiceDocument& doc, Splitting method) {
    if (doc.endpoints.empty()) {
        throw ValidationError(fmt::format("service '{}' has no endpoints to split", doc.title));
    }
    std::vector<IntermediateChunk> out;
    switch (method) {
        case Splitting::NoSplit:
            out.push_back({canonical_serialize(doc.raw), doc.endpoint_ids()});
            break;
        case Splitting::EndpointSplit:
            for (const auto& e : doc.endpoints) out.push_back({render_endpoint_text(e), {e.id()}});
            break;
        case Splitting::JsonSplit:
            for (const auto& [path, item] : doc.raw.at("paths").items()) {
                std::vector<std::string> keys{"paths", path}, lines;
                collect_leaves(item, keys, lines);
                IntermediateChunk group{join_lines(lines), {}};
                for (const auto& e : doc.endpoints) {
                    if (contains_path(group.text, e.path)) group.endpoint_refs.push_back(e.id());
                }
                if (!group.endpoint_refs.empty()) out.push_back(std::move(group));
            }
            break;
    }
    return out;
}

Endpoint remove_examples(const Endpoint& endpoint) {
    Endpoint out = endpoint;
    if (out.subtree.is_object()) out.subtree.erase("requestBody");
    strip_examples(out.subtree);
    return out;
}

std::string relevant_fields(const ServiceDocument& doc, const Endpoint& endpoint) {
    return fmt::format(
        "title: {}\nservice description: {}\nverb: {}\npath: {}\ndescription: {}",
        one_line(doc.title), one_line(doc.description), endpoint.verb, one_line(endpoint.path),
        one_line(endpoint.description));
}

std::string llm_describe(const Endpoint& endpoint, DescribeMode mode, ChatProvider& llm) {
    const bool summary = mode == DescribeMode::Summary;
    const auto& templates = PromptTemplates::builtin();
    ChatRequest request;
    request.task = summary ? tasks::kDescribeSummary : tasks::kDescribeQuery;
    request.messages.push_back(
        {"user",
         render_template(templates.get(summary ? "summary" : "query"),
                         {{"endpoint", render_endpoint_text(endpoint)}}),
         {},
         {}});
    request.context = {{"key", endpoint.id().str()},
                       {"verb", endpoint.verb},
                       {"path", endpoint.path},
                       {"description", endpoint.description},
                       {"summary", endpoint.subtree.is_object()
                                       ? endpoint.subtree.value("summary", std::string{})
                                       : std::string{}}};
    auto response = llm.complete(request);
    std::string text = strip_code_fence(response.message.content);
    if (text.empty()) {
        throw ContentError(fmt::format("empty {} for {}", summary ? "summary" : "query",
                                       endpoint.id().str()));
    }
    return text;
}

std::vector<EndpointId> craft_description_fallbacks(const ServiceDocument& doc) {
    std::vector<EndpointId> out;
    for (const auto& e : doc.endpoints) {
        if (e.description.empty()) out.push_back(e.id());
    }
    return out;
}

std::vector<ChunkView> chunk_document(const ServiceDocument& doc, const ChunkingStrategy& strategy,
                                      ChatProvider* llm, DescribeOptions options) {
    strategy.validate();
    if (strategy.uses_llm() && llm == nullptr) {
        throw ConfigError(strategy.label() + " needs a chat provider");
    }
    const auto& service = doc.title;
    ChunkView main{"main", {}};

    if (strategy.splitting != Splitting::EndpointSplit) {
        for (const auto& ic : split(doc, strategy.splitting)) {
            auto windows = multi_endpoint_windows(ic, strategy.chunk_size, strategy.overlap, service);
            std::move(windows.begin(), windows.end(), std::back_inserter(main.chunks));
        }
        return {std::move(main)};
    }
    if (doc.endpoints.empty()) {
        throw ValidationError(fmt::format("service '{}' has no endpoints to split", doc.title));
    }

    switch (strategy.refinement) {
        case Refinement::TokenChunking:
            for (const auto& e : doc.endpoints) {
                auto w = single_endpoint_windows(render_endpoint_text(e), e.id(), strategy.chunk_size,
                                                 strategy.overlap, service);
                std::move(w.begin(), w.end(), std::back_inserter(main.chunks));
            }
            break;
        case Refinement::RemoveExamples:
            for (const auto& e : doc.endpoints) {
                auto text = render_endpoint_text(remove_examples(e));
                main.chunks.push_back(make_chunk(text, text, {e.id()}, service));
            }
            break;
        case Refinement::RelevantFields:
            for (const auto& e : doc.endpoints) {
                auto text = relevant_fields(doc, e);
                main.chunks.push_back(make_chunk(text, text, {e.id()}, service));
            }
            break;
        case Refinement::JsonSplitTokenChunking:
            for (const auto& e : doc.endpoints) {
                Json wrapped;
                wrapped[e.path][e.verb] = e.subtree;
                auto text = join_lines(json_leaf_lines(wrapped));
                auto w = single_endpoint_windows(text, e.id(), strategy.chunk_size, strategy.overlap,
                                                 service);
                std::move(w.begin(), w.end(), std::back_inserter(main.chunks));
            }
            break;
        case Refinement::Summary:
        case Refinement::Query: {
            auto mode = strategy.refinement == Refinement::Summary ? DescribeMode::Summary
                                                                   : DescribeMode::Query;
            auto texts = describe_all(doc.endpoints, mode, *llm, options.parallelism);
            for (std::size_t i = 0; i < doc.endpoints.size(); ++i) {
                const auto& e = doc.endpoints[i];
                main.chunks.push_back(make_chunk(render_endpoint_text(e), texts[i], {e.id()}, service));
            }
            break;
        }
        case Refinement::Craft: {
            auto summaries = describe_all(doc.endpoints, DescribeMode::Summary, *llm, options.parallelism);
            ChunkView by_summary{"summary", {}}, by_name{"name", {}}, by_description{"description", {}};
            for (std::size_t i = 0; i < doc.endpoints.size(); ++i) {
                const auto& e = doc.endpoints[i];
                auto content = render_endpoint_text(e);
                auto name = e.id().str();
                by_summary.chunks.push_back(make_chunk(content, summaries[i], {e.id()}, service));
                by_name.chunks.push_back(make_chunk(content, name, {e.id()}, service));
                by_description.chunks.push_back(
                    make_chunk(content, e.description.empty() ? name : e.description, {e.id()}, service));
            }
            return {std::move(by_summary), std::move(by_name), std::move(by_description)};
        }
    }
    return {std::move(main)};
}

// ---------------------------------------------------------------------------
// Line-delimited chunk files

void write_chunks_jsonl(std::ostream& out, const std::vector<ChunkView>& views,
                        const ChunkingStrategy& strategy) {
    const auto fp = strategy.fingerprint();
    for (const auto& view : views) {
        for (const auto& chunk : view.chunks) {
            Json j = chunk.to_json();
            j["view"] = view.name;
            j["strategy"] = fp;
            out << j.dump() << '\n';
        }
    }
}

std::vector<ChunkView> read_chunks_jsonl(std::istream& in) {
    std::vector<ChunkView> views;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(fmt::format("line {}", line_no), e.what());
        }
        auto view = j.value("view", std::string("main"));
        auto it = std::find_if(views.begin(), views.end(), [&](const auto& v) { return v.name == view; });
        if (it == views.end()) {
            views.push_back({view, {}});
            it = std::prev(views.end());
        }
        try {
            it->chunks.push_back(Chunk::from_json(j));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(fmt::format("line {}", line_no), e.what());
        }
    }
    return views;
}

}  // namespace svcdisc
