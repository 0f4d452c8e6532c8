// SPDX-License-Identifier: Apache-2.0
#include "svcdisc/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>

#include <fmt/format.h>

#include "svcdisc/assets.hpp"
#include "svcdisc/error.hpp"

namespace svcdisc {

namespace {

constexpr TokenId kVocabBase = 256;
constexpr TokenId kCodepointBase = 1u << 24;

enum class CharClass { Letter, Digit, Space, Punct };

CharClass classify(unsigned char c) {
    if (c >= 0x80 || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) return CharClass::Letter;
    if (c >= '0' && c <= '9') return CharClass::Digit;
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
        return CharClass::Space;
    }
    return CharClass::Punct;
}

bool single_class(std::string_view s) {
    if (s.empty()) return false;
    auto cls = classify(static_cast<unsigned char>(s.front()));
    return std::all_of(s.begin(), s.end(),
                       [cls](char c) { return classify(static_cast<unsigned char>(c)) == cls; });
}

// Length of a valid, shortest-form UTF-8 sequence at s[0], or 0.
std::size_t utf8_sequence(std::string_view s, char32_t& cp) {
    auto b = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
    if (s.empty()) return 0;
    std::size_t n = 0;
    char32_t min = 0;
    unsigned char lead = b(0);
    if (lead >= 0xC2 && lead <= 0xDF) {
        n = 2;
        cp = lead & 0x1F;
        min = 0x80;
    } else if (lead >= 0xE0 && lead <= 0xEF) {
        n = 3;
        cp = lead & 0x0F;
        min = 0x800;
    } else if (lead >= 0xF0 && lead <= 0xF4) {
        n = 4;
        cp = lead & 0x07;
        min = 0x10000;
    } else {
        return 0;
    }
    if (s.size() < n) return 0;
    for (std::size_t i = 1; i < n; ++i) {
        if ((b(i) & 0xC0) != 0x80) return 0;
        cp = (cp << 6) | (b(i) & 0x3F);
    }
    if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
    return n;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

}  // namespace

struct ByteLevelTokenizer::Vocabulary {
    std::vector<std::string> entries;
    std::unordered_map<std::string, TokenId> ids;
    std::size_t max_length = 1;

    void add(std::string entry) {
        if (entry.size() < 2 || !single_class(entry) || ids.contains(entry)) return;
        max_length = std::max(max_length, entry.size());
        ids.emplace(entry, kVocabBase + static_cast<TokenId>(entries.size()));
        entries.push_back(std::move(entry));
    }
};

ByteLevelTokenizer::ByteLevelTokenizer() : vocab_(std::make_unique<Vocabulary>()) {
    auto& v = *vocab_;
    for (int n = 2; n <= 16; ++n) v.add(std::string(n, ' '));
    for (int n = 0; n <= 16; ++n) v.add("\n" + std::string(n, ' '));
    v.add("\r\n");
    for (int i = 0; i < 1000; ++i) {
        v.add(std::to_string(i));
        if (i < 100) v.add(fmt::format("{:02d}", i));
        v.add(fmt::format("{:03d}", i));
    }
    for (char a = 'a'; a <= 'z'; ++a) {
        for (char b = 'a'; b <= 'z'; ++b) {
            v.add({a, b});
            v.add({static_cast<char>(a - 'a' + 'A'), b});
            v.add({static_cast<char>(a - 'a' + 'A'), static_cast<char>(b - 'a' + 'A')});
        }
    }

    std::string_view text = assets::get("vocab.txt");
    while (!text.empty()) {
        auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (line.empty() || line.front() == '#') continue;
        std::string word(line);
        v.add(word);
        if (classify(static_cast<unsigned char>(word.front())) == CharClass::Letter) {
            std::string cap = word;
            cap.front() = static_cast<char>(std::toupper(static_cast<unsigned char>(cap.front())));
            v.add(cap);
            std::string up = word;
            std::transform(up.begin(), up.end(), up.begin(),
                           [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
            v.add(up);
        }
    }
}

ByteLevelTokenizer::~ByteLevelTokenizer() = default;

std::size_t ByteLevelTokenizer::vocabulary_size() const {
    return vocab_->entries.size();
}

std::vector<TokenId> ByteLevelTokenizer::encode(std::string_view text) const {
    std::vector<TokenId> out;
    out.reserve(text.size() / 3 + 1);
    const auto& v = *vocab_;
    std::string probe;
    std::size_t i = 0;
    while (i < text.size()) {
        auto cls = classify(static_cast<unsigned char>(text[i]));
        std::size_t run_end = i + 1;
        while (run_end < text.size() && classify(static_cast<unsigned char>(text[run_end])) == cls) {
            ++run_end;
        }
        while (i < run_end) {
            std::size_t longest = std::min(v.max_length, run_end - i);
            bool matched = false;
            for (std::size_t len = longest; len >= 2; --len) {
                probe.assign(text.substr(i, len));
                auto it = v.ids.find(probe);
                if (it != v.ids.end()) {
                    out.push_back(it->second);
                    i += len;
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
            auto c = static_cast<unsigned char>(text[i]);
            if (c >= 0x80) {
                char32_t cp = 0;
                if (auto n = utf8_sequence(text.substr(i, run_end - i), cp); n > 0) {
                    out.push_back(kCodepointBase + static_cast<TokenId>(cp));
                    i += n;
                    continue;
                }
            }
            out.push_back(c);
            ++i;
        }
    }
    return out;
}

std::string ByteLevelTokenizer::decode(std::span<const TokenId> tokens) const {
    std::string out;
    const auto& v = *vocab_;
    for (TokenId t : tokens) {
        if (t < kVocabBase) {
            out += static_cast<char>(t);
        } else if (t - kVocabBase < v.entries.size()) {
            out += v.entries[t - kVocabBase];
        } else if (t >= kCodepointBase && t - kCodepointBase <= 0x10FFFF) {
            append_utf8(out, static_cast<char32_t>(t - kCodepointBase));
        } else {
            throw ConfigError(fmt::format("token id {} is outside the vocabulary", t));
        }
    }
    return out;
}

std::shared_ptr<const Tokenizer> default_tokenizer() {
    static const auto instance = std::make_shared<const ByteLevelTokenizer>();
    return instance;
}

std::string TokenSeq::text() const {
    return decoder ? decoder->decode(tokens) : std::string{};
}

TokenSeq encode(std::string_view text, std::shared_ptr<const Tokenizer> tokenizer) {
    TokenSeq seq;
    seq.tokens = tokenizer->encode(text);
    seq.decoder = std::move(tokenizer);
    return seq;
}

std::size_t count_tokens(std::string_view text) {
    return default_tokenizer()->count(text);
}

std::vector<std::pair<std::size_t, std::size_t>> window_ranges(std::size_t length,
                                                               std::size_t size,
                                                               std::size_t overlap) {
    if (size == 0) throw ConfigError("chunk size must be positive");
    if (overlap >= size) {
        throw ConfigError(fmt::format("overlap {} must be smaller than chunk size {}", overlap, size));
    }
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    const std::size_t stride = size - overlap;
    for (std::size_t start = 0; start < length; start += stride) {
        std::size_t end = std::min(start + size, length);
        ranges.emplace_back(start, end);
        if (end == length) break;
    }
    return ranges;
}

std::vector<TokenSeq> window_split(const TokenSeq& tokens, std::size_t size, std::size_t overlap) {
    std::vector<TokenSeq> windows;
    for (auto [begin, end] : window_ranges(tokens.size(), size, overlap)) {
        TokenSeq w;
        w.tokens.assign(tokens.tokens.begin() + static_cast<std::ptrdiff_t>(begin),
                        tokens.tokens.begin() + static_cast<std::ptrdiff_t>(end));
        w.decoder = tokens.decoder;
        windows.push_back(std::move(w));
    }
    return windows;
}

}  // namespace svcdisc
