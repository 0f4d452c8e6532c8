// SPDX-License-Identifier: Apache-2.0
#include "svcdisc/hashing.hpp"

#include <fmt/format.h>

namespace svcdisc {

std::string hex64(std::uint64_t value) {
    return fmt::format("{:016x}", value);
}

std::string fingerprint_of(const Json& value) {
    return hex64(fnv1a64(value.dump()));
}

}  // namespace svcdisc
