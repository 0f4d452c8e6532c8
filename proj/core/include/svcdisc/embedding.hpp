// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "svcdisc/json.hpp"

namespace svcdisc {

/// Dense float vector. Vectors returned by providers are L2-normalized.
struct EmbeddingVector {
    std::vector<float> values;

    std::size_t dimension() const noexcept { return values.size(); }
    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

enum class EmbeddingProviderKind { Remote, DeterministicLocal };

struct EmbeddingRetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds backoff{500};
};

struct ProviderConfig {
    EmbeddingProviderKind kind = EmbeddingProviderKind::DeterministicLocal;
    std::string base_url;  // Remote, e.g. "https://api.example.com/v1"
    std::string model = "hash-bigram";
    std::string api_key;   // never serialized
    std::size_t dimension = 256;
    std::size_t batch_size = 64;
    std::size_t parallelism = 4;  // concurrent remote batches
    EmbeddingRetryPolicy retry;
    std::chrono::seconds timeout{60};

    /// Throws ConfigError unless dimension > 0 and batch_size >= 1.
    void validate() const;
    /// Reads EMBED_BASE_URL, EMBED_MODEL and EMBED_API_KEY over the current values.
    void apply_environment();

    Json to_json() const;
    static ProviderConfig from_json(const Json& j);
    /// Hash of kind, base URL, model and dimension.
    std::string fingerprint() const;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    /// One vector per text, in input order. Texts must be nonempty.
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
    virtual const ProviderConfig& config() const = 0;

    EmbeddingVector embed_one(const std::string& text) { return embed({text}).front(); }
};

/// Feature-hashing embedder: lowercase word unigrams and bigrams, hashed
/// together with the model name into `dimension` buckets, counted, normalized.
class DeterministicLocalProvider final : public EmbeddingProvider {
public:
    explicit DeterministicLocalProvider(ProviderConfig config);
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
    const ProviderConfig& config() const override { return config_; }

    /// The features a text is hashed from: unigrams in order, then bigrams in order.
    static std::vector<std::string> features(const std::string& text);
    /// Bucket of a feature under this provider's model and dimension.
    std::size_t bucket(const std::string& feature) const;

private:
    ProviderConfig config_;
};

/// Client for the common `POST {base_url}/embeddings` API
/// (`{"model", "input": [...]}` -> `{"data": [{"index", "embedding"}]}`).
class RemoteEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit RemoteEmbeddingProvider(ProviderConfig config);
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
    const ProviderConfig& config() const override { return config_; }

private:
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& batch) const;

    ProviderConfig config_;
};

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const ProviderConfig& config);

/// Validates the inputs, then embeds with `provider`.
/// Throws ConfigError for an empty list or an empty text.
std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts,
                                         EmbeddingProvider& provider);

/// Convenience overload constructing the provider from `config`.
std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts,
                                         const ProviderConfig& config);

/// dot(a, b) / (|a| |b|), accumulated in double. Zero vectors give 0.
/// Throws ContractError when the dimensions differ.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// Plain dot product in double; equals cosine for normalized inputs.
double dot(const EmbeddingVector& a, const EmbeddingVector& b);

/// Scales to unit L2 norm in double precision. A zero vector is returned unchanged.
EmbeddingVector normalized(const std::vector<double>& values);

}  // namespace svcdisc
