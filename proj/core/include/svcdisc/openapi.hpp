// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "svcdisc/json.hpp"

namespace svcdisc {

/// HTTP methods an OpenAPI path item may declare operations for.
inline constexpr std::string_view kAcceptedVerbs[] = {"GET",  "POST", "PUT",    "PATCH",
                                                      "DELETE", "HEAD", "OPTIONS"};

bool is_accepted_verb(std::string_view verb);

/// Canonical "<VERB> <path>" identity of an endpoint. Equality is text equality.
class EndpointId {
public:
    EndpointId() = default;

    /// Canonicalizes: strips surrounding whitespace, uppercases the verb.
    /// Throws ConfigError for an unknown verb or an empty path.
    static EndpointId make(std::string_view verb, std::string_view path);

    /// Parses "<verb> <path>" text (any amount of whitespace between the two).
    static EndpointId parse(std::string_view text);

    const std::string& str() const noexcept { return text_; }
    std::string_view verb() const;
    std::string_view path() const;

    friend auto operator<=>(const EndpointId&, const EndpointId&) = default;

private:
    std::string text_;
};

EndpointId canonical_endpoint_id(std::string_view verb, std::string_view path);

struct Endpoint {
    std::string verb;  // uppercase
    std::string path;
    std::string description;
    Json subtree = Json::object();  // the operation object, references inlined

    EndpointId id() const { return EndpointId::make(verb, path); }
    friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

struct ServiceDocument {
    std::string title;
    std::string description;
    Json raw;  // whole document; references under `paths` are inlined
    std::vector<Endpoint> endpoints;
    /// "location: reference" for every $ref that could not be inlined.
    std::vector<std::string> unresolved_refs;

    const Endpoint* find(const EndpointId& id) const;
    std::vector<EndpointId> endpoint_ids() const;
};

/// Parses an OpenAPI 3.x document from its JSON text.
/// Throws ParseError (with byte offset) on malformed text and ValidationError
/// when the `paths` object is missing or not an object.
ServiceDocument parse_service(std::string_view document_text);

/// Same as parse_service for an already parsed tree.
ServiceDocument service_from_json(Json raw);

/// Keys in insertion order, 2-space indentation, newline-terminated.
std::string canonical_serialize(const Json& value);

/// "<VERB> <path>\n" followed by the canonical serialization of the subtree.
std::string render_endpoint_text(const Endpoint& endpoint);

/// Inverse of render_endpoint_text.
Endpoint parse_endpoint_text(std::string_view text);

/// Description shown for an operation: `description`, else `summary`, else empty.
std::string operation_description(const Json& operation);

struct ValidationIssue {
    std::string location;
    std::string message;
    friend bool operator==(const ValidationIssue&, const ValidationIssue&) = default;
};

struct ValidationReport {
    bool syntactic_ok = true;
    std::vector<ValidationIssue> errors;
};

/// Structural subset of OpenAPI 3.x: version field, info.title, path items
/// mapping verbs to operation objects, non-empty responses, resolvable $refs.
ValidationReport validate_syntactic(const ServiceDocument& doc);

}  // namespace svcdisc
