// SPDX-License-Identifier: Apache-2.0
#include "svcdisc/prompts.hpp"

#include "svcdisc/assets.hpp"
#include "svcdisc/error.hpp"

namespace svcdisc {

const PromptTemplates& PromptTemplates::builtin() {
    static const PromptTemplates templates = [] {
        PromptTemplates t;
        std::string version(assets::get("prompts/VERSION.txt"));
        while (!version.empty() && (version.back() == '\n' || version.back() == ' ')) version.pop_back();
        t.version = version;
        const std::string prefix = "prompts/";
        for (const auto& name : assets::names()) {
            if (name.rfind(prefix, 0) != 0 || name == "prompts/VERSION.txt") continue;
            auto key = name.substr(prefix.size());
            key = key.substr(0, key.rfind(".txt"));
            t.texts.emplace(key, std::string(assets::get(name)));
        }
        t.validate();
        return t;
    }();
    return templates;
}

const std::string& PromptTemplates::get(std::string_view name) const {
    auto it = texts.find(name);
    if (it == texts.end()) throw ConfigError("missing prompt template '" + std::string(name) + "'");
    return it->second;
}

void PromptTemplates::validate() const {
    if (version.empty()) throw ConfigError("prompt templates carry no version");
    for (auto name : kRequiredTemplates) {
        auto it = texts.find(name);
        if (it == texts.end() || it->second.empty()) {
            throw ConfigError("prompt template '" + std::string(name) + "' is missing or empty");
        }
    }
}

std::string render_template(std::string_view text, const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto open = text.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(text.substr(pos));
            break;
        }
        auto close = text.find("}}", open + 2);
        if (close == std::string_view::npos) {
            out.append(text.substr(pos));
            break;
        }
        out.append(text.substr(pos, open - pos));
        std::string name(text.substr(open + 2, close - open - 2));
        auto it = vars.find(name);
        if (it == vars.end()) throw ConfigError("template placeholder '{{" + name + "}}' has no value");
        out.append(it->second);
        pos = close + 2;
    }
    return out;
}

}  // namespace svcdisc
