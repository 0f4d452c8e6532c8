// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <string_view>

namespace svcdisc {

/// Versioned prompt texts. The seven generation templates are
/// create_services, create_endpoints, create_openapi, check_openapi,
/// create_query, further_endpoints and check_necessary; the others drive
/// repairs, endpoint descriptions and the discovery agent.
struct PromptTemplates {
    std::string version;
    std::map<std::string, std::string, std::less<>> texts;

    /// Templates compiled in from core/assets/prompts.
    static const PromptTemplates& builtin();

    const std::string& get(std::string_view name) const;

    /// Throws ConfigError unless every required template is present and nonempty.
    void validate() const;
};

inline constexpr std::string_view kRequiredTemplates[] = {
    "create_services", "create_endpoints", "create_openapi", "check_openapi",
    "create_query",    "further_endpoints", "check_necessary"};

/// Substitutes every "{{name}}" with vars[name]. Unknown placeholders throw ConfigError.
std::string render_template(std::string_view text, const std::map<std::string, std::string>& vars);

}  // namespace svcdisc
