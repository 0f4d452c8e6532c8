// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "svcdisc/chunking.hpp"
#include "svcdisc/embedding.hpp"

namespace svcdisc {

struct ChunkRecord {
    std::uint32_t id = 0;
    EmbeddingVector vector;
    Chunk chunk;
};

struct ScoredHit {
    std::uint32_t id = 0;
    double score = 0.0;
    friend bool operator==(const ScoredHit&, const ScoredHit&) = default;
};

/// Exact, brute-force inner-product index. Append-only until sealed,
/// read-only afterwards; concurrent queries on a sealed index are safe.
class FlatIndex {
public:
    FlatIndex(std::size_t dimension, std::string strategy_fingerprint = {},
              std::string provider_fingerprint = {});

    /// Appends records with dense ids starting at size(). The whole batch is
    /// checked first, so a rejected batch leaves the index unchanged.
    /// Throws StateError after seal(), ContractError on a dimension mismatch.
    void insert(std::vector<EmbeddingVector> vectors, std::vector<Chunk> chunks);
    void insert(EmbeddingVector vector, Chunk chunk);
    void seal() noexcept { sealed_ = true; }
    bool sealed() const noexcept { return sealed_; }

    std::size_t size() const noexcept { return chunks_.size(); }
    std::size_t dimension() const noexcept { return dimension_; }
    const std::string& strategy_fingerprint() const noexcept { return strategy_fp_; }
    const std::string& provider_fingerprint() const noexcept { return provider_fp_; }

    const Chunk& chunk(std::uint32_t id) const { return chunks_.at(id); }
    EmbeddingVector vector(std::uint32_t id) const;
    ChunkRecord record(std::uint32_t id) const;

    /// Inner product of `query` with record `id`, accumulated in double.
    double score(const EmbeddingVector& query, std::uint32_t id) const;

    /// min(k, size) hits by descending score, ties by ascending id.
    /// Throws StateError when unsealed or empty, ConfigError for k == 0,
    /// ContractError on a dimension mismatch.
    std::vector<ScoredHit> top_k(const EmbeddingVector& query, std::size_t k) const;

    friend bool operator==(const FlatIndex&, const FlatIndex&) = default;

private:
    std::size_t dimension_;
    std::string strategy_fp_;
    std::string provider_fp_;
    std::vector<float> data_;  // row-major, size() * dimension_
    std::vector<Chunk> chunks_;
    bool sealed_ = false;
};

struct NamedIndex {
    std::string view;
    FlatIndex index;
    friend bool operator==(const NamedIndex&, const NamedIndex&) = default;
};

/// One or more sealed indexes (one per chunk view) stamped with the config
/// fingerprint of the run that produced them.
struct IndexSnapshot {
    std::string config_fingerprint;
    std::vector<NamedIndex> views;

    const FlatIndex& view(const std::string& name) const;
    bool has_view(const std::string& name) const;
    friend bool operator==(const IndexSnapshot&, const IndexSnapshot&) = default;
};

/// Binary layout, all integers little-endian:
///   "SVDXIDX\0", u32 version, str config_fingerprint, u32 view count, then per view:
///   str name, u32 dimension, u32 count, str strategy fp, str provider fp,
///   count*dimension f32 vectors, count chunk records (str compact JSON).
/// `str` is a u32 byte length followed by the bytes.
void save_snapshot(std::ostream& out, const IndexSnapshot& snapshot);
IndexSnapshot load_snapshot(std::istream& in);
void save_snapshot(const std::filesystem::path& path, const IndexSnapshot& snapshot);
IndexSnapshot load_snapshot(const std::filesystem::path& path);

inline constexpr std::uint32_t kSnapshotVersion = 1;

}  // namespace svcdisc
