// SPDX-License-Identifier: Apache-2.0
#include "svcdisc/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <future>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "http.hpp"
#include "svcdisc/error.hpp"
#include "svcdisc/hashing.hpp"

namespace svcdisc {

namespace {

const char* kind_name(EmbeddingProviderKind k) {
    return k == EmbeddingProviderKind::Remote ? "remote" : "deterministic-local";
}

bool is_word_byte(unsigned char c) {
    return c >= 0x80 || std::isalnum(c);
}

}  // namespace

// ---------------------------------------------------------------------------
// ProviderConfig

void ProviderConfig::validate() const {
    if (dimension == 0) throw ConfigError("embedding dimension must be positive");
    if (batch_size == 0) throw ConfigError("embedding batch size must be at least 1");
    if (parallelism == 0) throw ConfigError("embedding parallelism must be at least 1");
    if (retry.max_attempts < 1) throw ConfigError("embedding retry attempts must be at least 1");
    if (kind == EmbeddingProviderKind::Remote && base_url.empty()) {
        throw ConfigError("remote embedding provider needs a base URL (EMBED_BASE_URL)");
    }
    if (model.empty()) throw ConfigError("embedding model name is empty");
}

void ProviderConfig::apply_environment() {
    if (const char* v = std::getenv("EMBED_BASE_URL"); v && *v) base_url = v;
    if (const char* v = std::getenv("EMBED_MODEL"); v && *v) model = v;
    if (const char* v = std::getenv("EMBED_API_KEY"); v && *v) api_key = v;
}

Json ProviderConfig::to_json() const {
    Json j;
    j["kind"] = kind_name(kind);
    j["model"] = model;
    j["dimension"] = dimension;
    if (kind == EmbeddingProviderKind::Remote) {
        j["base_url"] = base_url;
        j["batch_size"] = batch_size;
        j["parallelism"] = parallelism;
        j["max_attempts"] = retry.max_attempts;
        j["backoff_ms"] = retry.backoff.count();
        j["timeout_s"] = timeout.count();
    }
    return j;
}

ProviderConfig ProviderConfig::from_json(const Json& j) {
    ProviderConfig c;
    auto kind = j.value("kind", std::string(kind_name(c.kind)));
    if (kind == "remote") {
        c.kind = EmbeddingProviderKind::Remote;
    } else if (kind == "deterministic-local") {
        c.kind = EmbeddingProviderKind::DeterministicLocal;
    } else {
        throw ConfigError("unknown embedding provider kind '" + kind + "'");
    }
    c.model = j.value("model", c.model);
    c.dimension = j.value("dimension", c.dimension);
    c.base_url = j.value("base_url", c.base_url);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.parallelism = j.value("parallelism", c.parallelism);
    c.retry.max_attempts = j.value("max_attempts", c.retry.max_attempts);
    c.retry.backoff = std::chrono::milliseconds(j.value("backoff_ms", c.retry.backoff.count()));
    c.timeout = std::chrono::seconds(j.value("timeout_s", c.timeout.count()));
    return c;
}

std::string ProviderConfig::fingerprint() const {
    Json j{{"kind", kind_name(kind)}, {"model", model}, {"dimension", dimension}};
    if (kind == EmbeddingProviderKind::Remote) j["base_url"] = base_url;
    return fingerprint_of(j);
}

// ---------------------------------------------------------------------------
// Vector math

EmbeddingVector normalized(const std::vector<double>& values) {
    double norm = 0.0;
    for (double v : values) norm += v * v;
    norm = std::sqrt(norm);
    EmbeddingVector out;
    out.values.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        out.values[i] = static_cast<float>(norm > 0.0 ? values[i] / norm : values[i]);
    }
    return out;
}

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension()) {
        throw ContractError(fmt::format("dimension mismatch: {} vs {}", a.dimension(), b.dimension()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        sum += static_cast<double>(a.values[i]) * static_cast<double>(b.values[i]);
    }
    return sum;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    double ab = dot(a, b), aa = dot(a, a), bb = dot(b, b);
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// DeterministicLocalProvider

DeterministicLocalProvider::DeterministicLocalProvider(ProviderConfig config)
    : config_(std::move(config)) {
    config_.validate();
}

std::vector<std::string> DeterministicLocalProvider::features(const std::string& text) {
    std::vector<std::string> words;
    std::string current;
    for (unsigned char c : text) {
        if (is_word_byte(c)) {
            current += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    if (words.empty()) return {text};

    std::vector<std::string> out = words;
    for (std::size_t i = 0; i + 1 < words.size(); ++i) out.push_back(words[i] + " " + words[i + 1]);
    return out;
}

std::size_t DeterministicLocalProvider::bucket(const std::string& feature) const {
    auto h = fnv1a64(feature, fnv1a64(config_.model + '\x1f'));
    return static_cast<std::size_t>(h % config_.dimension);
}

std::vector<EmbeddingVector> DeterministicLocalProvider::embed(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        std::vector<double> counts(config_.dimension, 0.0);
        for (const auto& f : features(text)) counts[bucket(f)] += 1.0;
        out.push_back(normalized(counts));
    }
    return out;
}

// ---------------------------------------------------------------------------
// RemoteEmbeddingProvider

RemoteEmbeddingProvider::RemoteEmbeddingProvider(ProviderConfig config) : config_(std::move(config)) {
    config_.validate();
}

std::vector<EmbeddingVector> RemoteEmbeddingProvider::embed_batch(
    const std::vector<std::string>& batch) const {
    const Json body{{"model", config_.model}, {"input", batch}};
    std::vector<std::pair<std::string, std::string>> headers;
    if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);

    std::string last_error;
    auto backoff = config_.retry.backoff;
    for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
        try {
            auto res = detail::post_json(config_.base_url, "/embeddings", body, headers, config_.timeout);
            if (res.status == 200) {
                Json parsed;
                try {
                    parsed = Json::parse(res.body);
                } catch (const nlohmann::json::parse_error& e) {
                    throw ContentError(std::string("embedding response is not JSON: ") + e.what());
                }
                const auto& data = parsed.at("data");
                if (!data.is_array() || data.size() != batch.size()) {
                    throw ContractError(fmt::format("embedding response has {} vectors for {} inputs",
                                                    data.is_array() ? data.size() : 0, batch.size()));
                }
                std::vector<EmbeddingVector> out(batch.size());
                for (std::size_t i = 0; i < data.size(); ++i) {
                    auto index = data[i].value("index", i);
                    if (index >= batch.size()) throw ContractError("embedding index out of range");
                    auto raw = data[i].at("embedding").get<std::vector<double>>();
                    if (raw.size() != config_.dimension) {
                        throw ContractError(fmt::format("embedding dimension {} does not match configured {}",
                                                        raw.size(), config_.dimension));
                    }
                    out[index] = normalized(raw);
                }
                return out;
            }
            last_error = fmt::format("HTTP {}: {}", res.status, res.body.substr(0, 300));
            if (!detail::retryable_status(res.status)) break;
        } catch (const TransportError& e) {
            last_error = e.what();
        } catch (const nlohmann::json::exception& e) {
            throw ContentError(std::string("unexpected embedding response: ") + e.what());
        }
        if (attempt < config_.retry.max_attempts) {
            spdlog::warn("embedding attempt {} failed ({}); retrying", attempt, last_error);
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    throw TransportError("embedding request failed: " + last_error);
}

std::vector<EmbeddingVector> RemoteEmbeddingProvider::embed(const std::vector<std::string>& texts) {
    std::vector<std::vector<std::string>> batches;
    for (std::size_t i = 0; i < texts.size(); i += config_.batch_size) {
        auto end = std::min(texts.size(), i + config_.batch_size);
        batches.emplace_back(texts.begin() + static_cast<std::ptrdiff_t>(i),
                             texts.begin() + static_cast<std::ptrdiff_t>(end));
    }
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < batches.size(); start += config_.parallelism) {
        auto end = std::min(batches.size(), start + config_.parallelism);
        std::vector<std::future<std::vector<EmbeddingVector>>> wave;
        for (std::size_t b = start; b < end; ++b) {
            wave.push_back(std::async(std::launch::async, [this, &batches, b] { return embed_batch(batches[b]); }));
        }
        for (auto& f : wave) {
            auto vectors = f.get();
            std::move(vectors.begin(), vectors.end(), std::back_inserter(out));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const ProviderConfig& config) {
    if (config.kind == EmbeddingProviderKind::Remote) {
        return std::make_unique<RemoteEmbeddingProvider>(config);
    }
    return std::make_unique<DeterministicLocalProvider>(config);
}

std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts,
                                         EmbeddingProvider& provider) {
    if (texts.empty()) throw ConfigError("nothing to embed");
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].empty()) throw ConfigError(fmt::format("text {} to embed is empty", i));
    }
    return provider.embed(texts);
}

std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts,
                                         const ProviderConfig& config) {
    auto provider = make_embedding_provider(config);
    return embed_texts(texts, *provider);
}

}  // namespace svcdisc
