// SPDX-License-Identifier: Apache-2.0
#include "http.hpp"

#include <httplib.h>

#include <fmt/format.h>

#include "svcdisc/error.hpp"

namespace svcdisc::detail {

std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    auto scheme = base_url.find("://");
    auto host_start = scheme == std::string::npos ? 0 : scheme + 3;
    auto slash = base_url.find('/', host_start);
    if (slash == std::string::npos) return {base_url, ""};
    std::string prefix = base_url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, slash), prefix};
}

HttpResponse post_json(const std::string& base_url, const std::string& path, const Json& body,
                       const std::vector<std::pair<std::string, std::string>>& headers,
                       std::chrono::seconds timeout) {
    auto [origin, prefix] = split_base_url(base_url);
    httplib::Client client(origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(prefix + path, h, body.dump(), "application/json");
    if (!res) {
        throw TransportError(fmt::format("POST {}{}{} failed: {}", origin, prefix, path,
                                         httplib::to_string(res.error())));
    }
    return {res->status, res->body};
}

}  // namespace svcdisc::detail
