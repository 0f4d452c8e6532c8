// SPDX-License-Identifier: Apache-2.0
#include "svcdisc/assets.hpp"

#include <map>

#include "svcdisc/error.hpp"

namespace svcdisc::assets {

// Defined in the generated assets_data.cpp.
const std::map<std::string, std::string_view, std::less<>>& table();

std::string_view get(std::string_view name) {
    const auto& t = table();
    auto it = t.find(name);
    if (it == t.end()) {
        throw NotFoundError("unknown asset: " + std::string(name));
    }
    return it->second;
}

bool contains(std::string_view name) {
    return table().find(name) != table().end();
}

std::vector<std::string> names() {
    std::vector<std::string> out;
    for (const auto& [k, v] : table()) out.push_back(k);
    return out;
}

}  // namespace svcdisc::assets
