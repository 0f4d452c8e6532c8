// SPDX-License-Identifier: Apache-2.0
#include "svcdisc/vector_index.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "svcdisc/error.hpp"

namespace svcdisc {

namespace {

constexpr std::array<char, 8> kMagic = {'S', 'V', 'D', 'X', 'I', 'D', 'X', '\0'};

void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b, 4);
}

void put_str(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_f32(std::ostream& out, float f) {
    put_u32(out, std::bit_cast<std::uint32_t>(f));
}

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    void bytes(char* dst, std::size_t n, const char* what) {
        in_.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw LoadError(fmt::format("byte {}", offset_), fmt::format("truncated snapshot while reading {}", what));
        }
        offset_ += n;
    }
    std::uint32_t u32(const char* what) {
        unsigned char b[4];
        bytes(reinterpret_cast<char*>(b), 4, what);
        return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
               static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
    }
    std::string str(const char* what) {
        auto n = u32(what);
        if (n > (1u << 30)) throw LoadError(fmt::format("byte {}", offset_), fmt::format("implausible length for {}", what));
        std::string s(n, '\0');
        if (n) bytes(s.data(), n, what);
        return s;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    std::size_t offset() const noexcept { return offset_; }

private:
    std::istream& in_;
    std::size_t offset_ = 0;
};

}  // namespace

FlatIndex::FlatIndex(std::size_t dimension, std::string strategy_fingerprint,
                     std::string provider_fingerprint)
    : dimension_(dimension),
      strategy_fp_(std::move(strategy_fingerprint)),
      provider_fp_(std::move(provider_fingerprint)) {
    if (dimension_ == 0) throw ConfigError("index dimension must be positive");
}

void FlatIndex::insert(std::vector<EmbeddingVector> vectors, std::vector<Chunk> chunks) {
    if (sealed_) throw StateError("cannot insert into a sealed index");
    if (vectors.size() != chunks.size()) {
        throw ContractError(fmt::format("{} vectors for {} chunks", vectors.size(), chunks.size()));
    }
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (vectors[i].dimension() != dimension_) {
            throw ContractError(fmt::format("record {} has dimension {}, index expects {}", i,
                                            vectors[i].dimension(), dimension_));
        }
    }
    for (auto& v : vectors) data_.insert(data_.end(), v.values.begin(), v.values.end());
    std::move(chunks.begin(), chunks.end(), std::back_inserter(chunks_));
}

void FlatIndex::insert(EmbeddingVector vector, Chunk chunk) {
    std::vector<EmbeddingVector> v;
    v.push_back(std::move(vector));
    std::vector<Chunk> c;
    c.push_back(std::move(chunk));
    insert(std::move(v), std::move(c));
}

EmbeddingVector FlatIndex::vector(std::uint32_t id) const {
    if (id >= size()) throw NotFoundError(fmt::format("no record with id {}", id));
    auto begin = data_.begin() + static_cast<std::ptrdiff_t>(std::size_t{id} * dimension_);
    return EmbeddingVector{std::vector<float>(begin, begin + static_cast<std::ptrdiff_t>(dimension_))};
}

ChunkRecord FlatIndex::record(std::uint32_t id) const {
    return ChunkRecord{id, vector(id), chunk(id)};
}

double FlatIndex::score(const EmbeddingVector& query, std::uint32_t id) const {
    const float* row = data_.data() + std::size_t{id} * dimension_;
    double sum = 0.0;
    for (std::size_t d = 0; d < dimension_; ++d) {
        sum += static_cast<double>(query.values[d]) * static_cast<double>(row[d]);
    }
    return sum;
}

std::vector<ScoredHit> FlatIndex::top_k(const EmbeddingVector& query, std::size_t k) const {
    if (!sealed_) throw StateError("index must be sealed before querying");
    if (chunks_.empty()) throw StateError("index is empty");
    if (k == 0) throw ConfigError("k must be at least 1");
    if (query.dimension() != dimension_) {
        throw ContractError(fmt::format("query has dimension {}, index expects {}", query.dimension(),
                                        dimension_));
    }
    std::vector<ScoredHit> hits(size());
    for (std::uint32_t id = 0; id < hits.size(); ++id) hits[id] = {id, score(query, id)};
    auto n = std::min(k, hits.size());
    auto better = [](const ScoredHit& a, const ScoredHit& b) {
        return a.score != b.score ? a.score > b.score : a.id < b.id;
    };
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(), better);
    hits.resize(n);
    return hits;
}

const FlatIndex& IndexSnapshot::view(const std::string& name) const {
    for (const auto& v : views) {
        if (v.view == name) return v.index;
    }
    throw NotFoundError(fmt::format("snapshot has no view '{}'", name));
}

bool IndexSnapshot::has_view(const std::string& name) const {
    return std::any_of(views.begin(), views.end(), [&](const auto& v) { return v.view == name; });
}

void save_snapshot(std::ostream& out, const IndexSnapshot& snapshot) {
    out.write(kMagic.data(), kMagic.size());
    put_u32(out, kSnapshotVersion);
    put_str(out, snapshot.config_fingerprint);
    put_u32(out, static_cast<std::uint32_t>(snapshot.views.size()));
    for (const auto& [name, index] : snapshot.views) {
        put_str(out, name);
        put_u32(out, static_cast<std::uint32_t>(index.dimension()));
        put_u32(out, static_cast<std::uint32_t>(index.size()));
        put_str(out, index.strategy_fingerprint());
        put_str(out, index.provider_fingerprint());
        for (std::uint32_t id = 0; id < index.size(); ++id) {
            for (float f : index.vector(id).values) put_f32(out, f);
        }
        for (std::uint32_t id = 0; id < index.size(); ++id) put_str(out, index.chunk(id).to_json().dump());
    }
    if (!out) throw Error("failed to write index snapshot");
}

IndexSnapshot load_snapshot(std::istream& in) {
    Reader r(in);
    std::array<char, 8> magic{};
    r.bytes(magic.data(), magic.size(), "magic");
    if (magic != kMagic) throw LoadError("byte 0", "not an index snapshot (bad magic)");
    auto version = r.u32("version");
    if (version != kSnapshotVersion) {
        throw LoadError("byte 8", fmt::format("unsupported snapshot version {}", version));
    }
    IndexSnapshot snap;
    snap.config_fingerprint = r.str("config fingerprint");
    auto views = r.u32("view count");
    for (std::uint32_t v = 0; v < views; ++v) {
        auto name = r.str("view name");
        auto dim = r.u32("dimension");
        auto count = r.u32("record count");
        auto sfp = r.str("strategy fingerprint");
        auto pfp = r.str("provider fingerprint");
        if (dim == 0) throw LoadError(fmt::format("byte {}", r.offset()), "view dimension is zero");
        FlatIndex index(dim, sfp, pfp);
        std::vector<EmbeddingVector> vectors(count);
        for (auto& vec : vectors) {
            vec.values.resize(dim);
            for (auto& f : vec.values) f = r.f32("vector");
        }
        std::vector<Chunk> chunks;
        chunks.reserve(count);
        for (std::uint32_t i = 0; i < count; ++i) {
            auto at = r.offset();
            auto text = r.str("chunk record");
            try {
                chunks.push_back(Chunk::from_json(Json::parse(text)));
            } catch (const nlohmann::json::exception& e) {
                throw LoadError(fmt::format("byte {}", at), std::string("bad chunk record: ") + e.what());
            }
        }
        index.insert(std::move(vectors), std::move(chunks));
        index.seal();
        snap.views.push_back({std::move(name), std::move(index)});
    }
    return snap;
}

void save_snapshot(const std::filesystem::path& path, const IndexSnapshot& snapshot) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        save_snapshot(out, snapshot);
    }
    std::filesystem::rename(tmp, path);
}

IndexSnapshot load_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError(path.string(), "cannot open snapshot");
    return load_snapshot(in);
}

}  // namespace svcdisc
