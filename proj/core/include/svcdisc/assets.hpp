// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace svcdisc::assets {

/// Text asset compiled into the library, addressed by its path under core/assets/.
/// Throws NotFoundError for unknown names.
std::string_view get(std::string_view name);

bool contains(std::string_view name);

std::vector<std::string> names();

}  // namespace svcdisc::assets
