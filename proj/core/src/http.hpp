// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include "svcdisc/json.hpp"

namespace svcdisc::detail {

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// Splits "https://host:port/prefix" into ("https://host:port", "/prefix").
std::pair<std::string, std::string> split_base_url(const std::string& base_url);

/// POSTs a JSON body to base_url + path. Throws TransportError when no HTTP
/// response was received at all; HTTP error statuses are returned.
HttpResponse post_json(const std::string& base_url, const std::string& path, const Json& body,
                       const std::vector<std::pair<std::string, std::string>>& headers,
                       std::chrono::seconds timeout);

/// Retry when the failure is plausibly transient.
inline bool retryable_status(int status) {
    return status == 408 || status == 429 || status >= 500;
}

}  // namespace svcdisc::detail
