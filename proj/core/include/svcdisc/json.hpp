// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

namespace svcdisc {

/// Document tree that keeps object keys in insertion order.
using Json = nlohmann::ordered_json;

}  // namespace svcdisc
