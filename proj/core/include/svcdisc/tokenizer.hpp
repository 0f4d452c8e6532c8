// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace svcdisc {

using TokenId = std::uint32_t;

/// Lossless text tokenizer: decode(encode(t)) == t for every byte string t.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::vector<TokenId> encode(std::string_view text) const = 0;
    virtual std::string decode(std::span<const TokenId> tokens) const = 0;
    virtual std::string name() const = 0;

    std::size_t count(std::string_view text) const { return encode(text).size(); }
};

/// Default tokenizer. Cuts text into single-class character runs and encodes
/// each run greedily with the longest match from the vocabulary asset
/// `vocab.txt`, falling back to code points and raw bytes. Encoding a window
/// of tokens cut at token boundaries reproduces exactly that window.
class ByteLevelTokenizer final : public Tokenizer {
public:
    ByteLevelTokenizer();
    ~ByteLevelTokenizer() override;

    std::vector<TokenId> encode(std::string_view text) const override;
    std::string decode(std::span<const TokenId> tokens) const override;
    std::string name() const override { return "byte-level-v1"; }

    std::size_t vocabulary_size() const;

private:
    struct Vocabulary;
    std::unique_ptr<Vocabulary> vocab_;
};

/// Process-wide shared instance of ByteLevelTokenizer.
std::shared_ptr<const Tokenizer> default_tokenizer();

/// Token ids plus the tokenizer that can turn them back into text.
struct TokenSeq {
    std::vector<TokenId> tokens;
    std::shared_ptr<const Tokenizer> decoder;

    std::size_t size() const noexcept { return tokens.size(); }
    bool empty() const noexcept { return tokens.empty(); }
    std::string text() const;
};

TokenSeq encode(std::string_view text,
                std::shared_ptr<const Tokenizer> tokenizer = default_tokenizer());

std::size_t count_tokens(std::string_view text);

/// Fixed-size windows of at most `size` tokens; consecutive windows share
/// `overlap` tokens, i.e. windows start every `size - overlap` tokens.
/// Throws ConfigError unless 0 <= overlap < size.
std::vector<TokenSeq> window_split(const TokenSeq& tokens, std::size_t size, std::size_t overlap);

/// Token index ranges [begin, end) that window_split produces for `length` tokens.
std::vector<std::pair<std::size_t, std::size_t>> window_ranges(std::size_t length,
                                                               std::size_t size,
                                                               std::size_t overlap);

}  // namespace svcdisc
