// SPDX-License-Identifier: Apache-2.0
#include "svcdisc/openapi.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <fmt/format.h>

#include "svcdisc/error.hpp"

namespace svcdisc {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

std::string accepted_verbs_list() {
    std::string out;
    for (auto v : kAcceptedVerbs) {
        if (!out.empty()) out += ", ";
        out += v;
    }
    return out;
}

// Inlines local "#/..." references below `node`. `root` is the untouched
// original document that references point into.
class RefInliner {
public:
    explicit RefInliner(const Json& root) : root_(root) {}

    void inline_refs(Json& node, const std::string& location) {
        if (node.is_object()) {
            auto ref = node.find("$ref");
            if (ref != node.end() && ref->is_string()) {
                resolve(node, ref->get<std::string>(), location);
                return;
            }
            for (auto& [key, child] : node.items()) {
                inline_refs(child, location + "." + key);
            }
        } else if (node.is_array()) {
            for (std::size_t i = 0; i < node.size(); ++i) {
                inline_refs(node[i], fmt::format("{}.{}", location, i));
            }
        }
    }

    std::vector<std::string> unresolved;

private:
    void resolve(Json& node, const std::string& ref, const std::string& location) {
        if (ref.rfind("#/", 0) != 0 && ref != "#") {
            unresolved.push_back(location + ": external reference " + ref);
            return;
        }
        if (std::find(active_.begin(), active_.end(), ref) != active_.end()) {
            unresolved.push_back(location + ": cyclic reference " + ref);
            return;
        }
        Json target;
        try {
            Json::json_pointer ptr(ref.substr(1));
            if (!root_.contains(ptr)) {
                unresolved.push_back(location + ": unresolvable reference " + ref);
                return;
            }
            target = root_.at(ptr);
        } catch (const nlohmann::json::exception&) {
            unresolved.push_back(location + ": malformed reference " + ref);
            return;
        }
        active_.push_back(ref);
        inline_refs(target, location);
        active_.pop_back();
        node = std::move(target);
    }

    const Json& root_;
    std::vector<std::string> active_;
};

Json merge_path_parameters(const Json& path_item, Json operation) {
    auto shared = path_item.find("parameters");
    if (shared == path_item.end() || !shared->is_array() || !operation.is_object()) {
        return operation;
    }
    if (!operation.contains("parameters")) {
        operation["parameters"] = *shared;
        return operation;
    }
    auto& own = operation["parameters"];
    if (!own.is_array()) return operation;
    auto key = [](const Json& p) {
        return p.is_object() ? p.value("in", std::string{}) + "/" + p.value("name", std::string{})
                             : std::string{};
    };
    std::set<std::string> overridden;
    for (const auto& p : own) overridden.insert(key(p));
    Json merged = Json::array();
    for (const auto& p : *shared) {
        if (!overridden.contains(key(p))) merged.push_back(p);
    }
    for (const auto& p : own) merged.push_back(p);
    own = std::move(merged);
    return operation;
}

}  // namespace

bool is_accepted_verb(std::string_view verb) {
    auto u = upper(trim(verb));
    return std::find(std::begin(kAcceptedVerbs), std::end(kAcceptedVerbs), u) !=
           std::end(kAcceptedVerbs);
}

EndpointId EndpointId::make(std::string_view verb, std::string_view path) {
    auto v = upper(trim(verb));
    auto p = trim(path);
    if (v.empty()) throw ConfigError("endpoint verb is empty");
    if (p.empty()) throw ConfigError("endpoint path is empty");
    if (!is_accepted_verb(v)) {
        throw ConfigError(fmt::format("unknown HTTP verb '{}'; accepted verbs: {}", v,
                                      accepted_verbs_list()));
    }
    EndpointId id;
    id.text_ = v + " " + std::string(p);
    return id;
}

EndpointId EndpointId::parse(std::string_view text) {
    auto t = trim(text);
    auto space = t.find_first_of(" \t");
    if (space == std::string_view::npos) {
        throw ConfigError(fmt::format("'{}' is not of the form '<VERB> <path>'", t));
    }
    return make(t.substr(0, space), t.substr(space + 1));
}

std::string_view EndpointId::verb() const {
    std::string_view t = text_;
    return t.substr(0, t.find(' '));
}

std::string_view EndpointId::path() const {
    std::string_view t = text_;
    auto space = t.find(' ');
    return space == std::string_view::npos ? std::string_view{} : t.substr(space + 1);
}

EndpointId canonical_endpoint_id(std::string_view verb, std::string_view path) {
    return EndpointId::make(verb, path);
}

const Endpoint* ServiceDocument::find(const EndpointId& id) const {
    for (const auto& e : endpoints) {
        if (e.id() == id) return &e;
    }
    return nullptr;
}

std::vector<EndpointId> ServiceDocument::endpoint_ids() const {
    std::vector<EndpointId> out;
    out.reserve(endpoints.size());
    for (const auto& e : endpoints) out.push_back(e.id());
    return out;
}

std::string operation_description(const Json& operation) {
    if (!operation.is_object()) return {};
    for (const char* key : {"description", "summary"}) {
        auto it = operation.find(key);
        if (it != operation.end() && it->is_string() && !it->get<std::string>().empty()) {
            return it->get<std::string>();
        }
    }
    return {};
}

ServiceDocument service_from_json(Json raw) {
    if (!raw.is_object()) {
        throw ValidationError("document root must be an object");
    }
    auto paths_it = raw.find("paths");
    if (paths_it == raw.end()) {
        throw ValidationError("paths: missing paths object");
    }
    if (!paths_it->is_object()) {
        throw ValidationError("paths: must be an object");
    }

    ServiceDocument doc;
    {
        const Json original = raw;
        RefInliner inliner(original);
        inliner.inline_refs(raw["paths"], "paths");
        doc.unresolved_refs = std::move(inliner.unresolved);
    }

    if (auto info = raw.find("info"); info != raw.end() && info->is_object()) {
        doc.title = info->value("title", std::string{});
        doc.description = info->value("description", std::string{});
    }

    std::set<EndpointId> seen;
    for (const auto& [path, item] : raw["paths"].items()) {
        if (!item.is_object()) continue;
        for (const auto& [key, operation] : item.items()) {
            if (!is_accepted_verb(key)) continue;
            Endpoint e;
            e.verb = upper(key);
            e.path = path;
            e.subtree = merge_path_parameters(item, operation);
            e.description = operation_description(operation);
            auto id = e.id();
            if (!seen.insert(id).second) {
                throw ValidationError(
                    fmt::format("paths.{}: duplicate operation {}", path, id.str()));
            }
            doc.endpoints.push_back(std::move(e));
        }
    }
    doc.raw = std::move(raw);
    return doc;
}

ServiceDocument parse_service(std::string_view document_text) {
    Json raw;
    try {
        raw = Json::parse(document_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(fmt::format("byte {}", e.byte), e.what());
    }
    return service_from_json(std::move(raw));
}

std::string canonical_serialize(const Json& value) {
    return value.dump(2) + "\n";
}

std::string render_endpoint_text(const Endpoint& endpoint) {
    return endpoint.id().str() + "\n" + canonical_serialize(endpoint.subtree);
}

Endpoint parse_endpoint_text(std::string_view text) {
    auto newline = text.find('\n');
    if (newline == std::string_view::npos) {
        throw ParseError("line 1", "endpoint text has no body section");
    }
    auto id = EndpointId::parse(text.substr(0, newline));
    Endpoint e;
    e.verb = std::string(id.verb());
    e.path = std::string(id.path());
    try {
        e.subtree = Json::parse(text.substr(newline + 1));
    } catch (const nlohmann::json::parse_error& err) {
        throw ParseError(fmt::format("byte {}", newline + 1 + err.byte), err.what());
    }
    e.description = operation_description(e.subtree);
    return e;
}

ValidationReport validate_syntactic(const ServiceDocument& doc) {
    ValidationReport report;
    auto fail = [&](std::string location, std::string message) {
        report.errors.push_back({std::move(location), std::move(message)});
    };
    const Json& raw = doc.raw;
    if (!raw.is_object()) {
        fail("", "document root must be an object");
        report.syntactic_ok = false;
        return report;
    }

    auto version = raw.find("openapi");
    if (version == raw.end() || !version->is_string()) {
        fail("openapi", "version field missing");
    } else if (version->get<std::string>().rfind("3.", 0) != 0) {
        fail("openapi", "only OpenAPI 3.x documents are supported");
    }

    auto info = raw.find("info");
    if (info == raw.end() || !info->is_object()) {
        fail("info", "info object missing");
        fail("info.title", "title missing");
    } else {
        auto title = info->find("title");
        if (title == info->end() || !title->is_string() || title->get<std::string>().empty()) {
            fail("info.title", "title missing");
        }
    }

    auto paths = raw.find("paths");
    if (paths == raw.end() || !paths->is_object()) {
        fail("paths", "paths object missing");
    } else {
        for (const auto& [path, item] : paths->items()) {
            const std::string loc = "paths." + path;
            if (path.empty() || path.front() != '/') {
                fail(loc, "path must begin with '/'");
            }
            if (!item.is_object()) {
                fail(loc, "path item must be an object");
                continue;
            }
            for (const auto& [key, operation] : item.items()) {
                if (!is_accepted_verb(key)) continue;
                const std::string op_loc = loc + "." + key;
                if (!operation.is_object()) {
                    fail(op_loc, "operation must be an object");
                    continue;
                }
                auto responses = operation.find("responses");
                if (responses == operation.end() || !responses->is_object()) {
                    fail(op_loc + ".responses", "responses map missing");
                } else if (responses->empty()) {
                    fail(op_loc + ".responses", "responses map is empty");
                }
            }
        }
    }

    for (const auto& unresolved : doc.unresolved_refs) {
        auto colon = unresolved.find(": ");
        fail(unresolved.substr(0, colon),
             colon == std::string::npos ? "unresolved reference" : unresolved.substr(colon + 2));
    }

    report.syntactic_ok = report.errors.empty();
    return report;
}

}  // namespace svcdisc
