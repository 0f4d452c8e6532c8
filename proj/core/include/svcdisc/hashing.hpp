// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "svcdisc/json.hpp"

namespace svcdisc {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

/// 64-bit FNV-1a. Used for feature hashing and fingerprints, never for security.
constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = kFnvOffset) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

/// 16 lowercase hex digits.
std::string hex64(std::uint64_t value);

/// Stable fingerprint of a document: FNV-1a over its compact serialization.
std::string fingerprint_of(const Json& value);

}  // namespace svcdisc
