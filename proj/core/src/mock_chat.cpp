// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cctype>
#include <map>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <fmt/format.h>

#include "chat_internal.hpp"
#include "svcdisc/agent.hpp"
#include "svcdisc/chat.hpp"
#include "svcdisc/error.hpp"
#include "svcdisc/hashing.hpp"

namespace svcdisc {

namespace {

struct Entity {
    const char* singular;
    const char* plural;
};

const std::map<std::string, std::vector<Entity>>& sector_entities() {
    static const std::map<std::string, std::vector<Entity>> table = {
        {"Energy", {{"well", "wells"}, {"pipeline", "pipelines"}, {"refinery", "refineries"}, {"drilling rig", "drilling rigs"},
                    {"tanker cargo", "tanker cargoes"}, {"reservoir", "reservoirs"}, {"wind turbine", "wind turbines"},
                    {"emission permit", "emission permits"}}},
        {"Materials", {{"ore shipment", "ore shipments"}, {"smelter", "smelters"}, {"chemical batch", "chemical batches"},
                       {"mine site", "mine sites"}, {"steel coil", "steel coils"}, {"packaging order", "packaging orders"},
                       {"lumber lot", "lumber lots"}, {"quarry", "quarries"}}},
        {"Industrials", {{"freight container", "freight containers"}, {"assembly line", "assembly lines"},
                         {"aircraft part", "aircraft parts"}, {"rail car", "rail cars"}, {"construction crane", "construction cranes"},
                         {"maintenance ticket", "maintenance tickets"}, {"warehouse bay", "warehouse bays"},
                         {"safety inspection", "safety inspections"}}},
        {"Consumer Discretionary", {{"hotel booking", "hotel bookings"}, {"vehicle listing", "vehicle listings"},
                                    {"apparel item", "apparel items"}, {"restaurant table", "restaurant tables"},
                                    {"loyalty member", "loyalty members"}, {"gift card", "gift cards"},
                                    {"cruise cabin", "cruise cabins"}, {"furniture order", "furniture orders"}}},
        {"Consumer Staples", {{"grocery order", "grocery orders"}, {"shelf label", "shelf labels"}, {"crop harvest", "crop harvests"},
                              {"beverage batch", "beverage batches"}, {"store shipment", "store shipments"},
                              {"supplier contract", "supplier contracts"}, {"recall notice", "recall notices"},
                              {"household product", "household products"}}},
        {"Health Care", {{"patient", "patients"}, {"clinical trial", "clinical trials"}, {"prescription", "prescriptions"},
                         {"lab sample", "lab samples"}, {"hospital bed", "hospital beds"}, {"medical device", "medical devices"},
                         {"insurance claim", "insurance claims"}, {"vaccine lot", "vaccine lots"}}},
        {"Financials", {{"loan application", "loan applications"}, {"trade order", "trade orders"}, {"bank account", "bank accounts"},
                        {"insurance policy", "insurance policies"}, {"wire transfer", "wire transfers"},
                        {"credit report", "credit reports"}, {"fund portfolio", "fund portfolios"},
                        {"fraud case", "fraud cases"}}},
        {"Information Technology", {{"server", "servers"}, {"software license", "software licenses"},
                                    {"chip wafer", "chip wafers"}, {"support ticket", "support tickets"},
                                    {"network switch", "network switches"}, {"code repository", "code repositories"},
                                    {"cloud instance", "cloud instances"}, {"firmware build", "firmware builds"}}},
        {"Communication Services", {{"ad campaign", "ad campaigns"}, {"streaming title", "streaming titles"},
                                    {"subscriber", "subscribers"}, {"cell tower", "cell towers"}, {"news article", "news articles"},
                                    {"game server", "game servers"}, {"broadcast slot", "broadcast slots"},
                                    {"phone number", "phone numbers"}}},
        {"Utilities", {{"smart meter", "smart meters"}, {"power outage", "power outages"}, {"water main", "water mains"},
                       {"substation", "substations"}, {"billing cycle", "billing cycles"}, {"gas valve", "gas valves"},
                       {"solar array", "solar arrays"}, {"service connection", "service connections"}}},
        {"Real Estate", {{"property listing", "property listings"}, {"lease agreement", "lease agreements"},
                         {"tenant", "tenants"}, {"building permit", "building permits"}, {"parking space", "parking spaces"},
                         {"office suite", "office suites"}, {"appraisal", "appraisals"}, {"maintenance request", "maintenance requests"}}},
    };
    return table;
}

const std::vector<Entity> kGenericEntities = {
    {"asset", "assets"}, {"order", "orders"}, {"contract", "contracts"}, {"site", "sites"},
    {"shipment", "shipments"}, {"inspection", "inspections"}, {"account", "accounts"}, {"schedule", "schedules"}};

const char* const kServiceSuffixes[] = {"Tracker", "Registry", "Planner", "Monitor", "Exchange", "Hub", "Ledger", "Console"};

struct EndpointTemplate {
    const char* verb;
    const char* path;         // {c}: collection slug, {id}: id parameter
    const char* description;  // {e}: singular, {a}: its article, {p}: plural, {s}: service
};

const EndpointTemplate kEndpointTemplates[] = {
    {"GET", "/{c}", "List all {p} recorded in the {s}"},
    {"POST", "/{c}", "Register a new {e} in the {s}"},
    {"GET", "/{c}/{id}", "Retrieve the full record of one {e}"},
    {"PUT", "/{c}/{id}", "Replace the stored data of an existing {e}"},
    {"PATCH", "/{c}/{id}", "Update selected attributes of {a} {e}"},
    {"DELETE", "/{c}/{id}", "Remove {a} {e} from the {s}"},
    {"GET", "/{c}/{id}/history", "Show the change history of {a} {e}"},
    {"GET", "/{c}/reports/summary", "Produce an aggregated status report across {p}"},
    {"POST", "/{c}/{id}/alerts", "Raise an operational alert for {a} {e}"},
    {"GET", "/{c}/search", "Search {p} by name, location or status"},
    {"POST", "/{c}/import", "Import {p} in bulk from a file"},
    {"GET", "/{c}/{id}/forecast", "Forecast upcoming demand for {a} {e}"},
};

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
    for (auto pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size())) {
        text.replace(pos, from.size(), to);
    }
    return text;
}

std::string slug(const std::string& text) {
    std::string out;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            out += static_cast<char>(std::tolower(c));
        } else if (!out.empty() && out.back() != '-') {
            out += '-';
        }
    }
    return out;
}

std::string camel(const std::string& text) {
    std::string out;
    bool up = false;
    for (unsigned char c : text) {
        if (!std::isalnum(c)) {
            up = !out.empty();
            continue;
        }
        out += static_cast<char>(up ? std::toupper(c) : c);
        up = false;
    }
    return out;
}

std::string title_case(const std::string& text) {
    std::string out = text;
    bool start = true;
    for (auto& c : out) {
        if (start && std::isalpha(static_cast<unsigned char>(c))) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        start = c == ' ';
    }
    return out;
}

std::string lower_first(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
    return s;
}

std::string upper_first(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

ChatMessage text_reply(std::string content) {
    return ChatMessage{"assistant", std::move(content), {}, {}};
}

// The entity a generated service is about, recovered from its name.
Entity entity_of_service(const std::string& service, std::string& singular, std::string& plural) {
    for (const auto& [_, entities] : sector_entities()) {
        for (const auto& e : entities) {
            if (lower(service).rfind(e.singular, 0) == 0) {
                singular = e.singular;
                plural = e.plural;
                return e;
            }
        }
    }
    for (const auto& e : kGenericEntities) {
        if (lower(service).rfind(e.singular, 0) == 0) {
            singular = e.singular;
            plural = e.plural;
            return e;
        }
    }
    singular = lower(service);
    plural = singular + " records";
    return {nullptr, nullptr};
}

Json entity_schema() {
    return Json{{"type", "object"},
                {"properties",
                 {{"id", {{"type", "string"}}},
                  {"name", {{"type", "string"}}},
                  {"status", {{"type", "string"}, {"enum", {"active", "inactive", "pending"}}}},
                  {"location", {{"type", "string"}}},
                  {"updatedAt", {{"type", "string"}, {"format", "date-time"}}}}}};
}

Json entity_example(const std::string& singular) {
    return Json{{"id", slug(singular) + "-001"},
                {"name", "Sample " + singular},
                {"status", "active"},
                {"location", "Site A"},
                {"updatedAt", "2024-01-15T08:30:00Z"}};
}

Json build_operation(const std::string& verb, const std::string& path, const std::string& description,
                     const std::string& singular) {
    Json op;
    op["operationId"] = camel(lower(verb) + " " + path);
    op["summary"] = description;
    op["description"] = description;
    Json params = Json::array();
    for (auto open = path.find('{'); open != std::string::npos; open = path.find('{', open + 1)) {
        auto close = path.find('}', open);
        params.push_back({{"name", path.substr(open + 1, close - open - 1)},
                          {"in", "path"},
                          {"required", true},
                          {"schema", {{"type", "string"}}}});
    }
    if (verb == "GET" && path.find('{') == std::string::npos) {
        params.push_back({{"name", "limit"}, {"in", "query"}, {"required", false}, {"schema", {{"type", "integer"}, {"default", 20}}}});
    }
    if (!params.empty()) op["parameters"] = std::move(params);
    const Json body_content{{"application/json",
                             {{"schema", entity_schema()}, {"examples", {{"sample", {{"value", entity_example(singular)}}}}}}}};
    if (verb == "POST" || verb == "PUT" || verb == "PATCH") {
        op["requestBody"] = {{"required", true}, {"content", body_content}};
    }
    Json responses;
    if (verb == "DELETE") {
        responses["204"] = {{"description", "The " + singular + " was removed"}};
    } else {
        responses[verb == "POST" ? "201" : "200"] = {{"description", "Successful response"}, {"content", body_content}};
    }
    if (path.find('{') != std::string::npos) responses["404"] = {{"description", "No such " + singular}};
    op["responses"] = std::move(responses);
    return op;
}

Json build_openapi(const Json& ctx) {
    const auto service = ctx.value("service", std::string("Service"));
    std::string singular, plural;
    entity_of_service(service, singular, plural);
    Json doc;
    doc["openapi"] = "3.0.3";
    doc["info"] = {{"title", service}, {"description", ctx.value("description", std::string{})}, {"version", "1.0.0"}};
    Json paths = Json::object();
    for (const auto& e : ctx.at("endpoints")) {
        auto verb = e.at("verb").get<std::string>();
        auto path = e.at("path").get<std::string>();
        paths[path][lower(verb)] = build_operation(verb, path, e.value("description", std::string{}), singular);
    }
    doc["paths"] = std::move(paths);
    return doc;
}

std::string query_from(const Json& expected) {
    std::vector<std::string> parts;
    for (const auto& e : expected) parts.push_back(lower_first(e.value("description", e.value("endpoint", std::string{}))));
    std::string q;
    for (std::size_t i = 0; i < parts.size(); ++i) q += (i ? "; " : "") + parts[i];
    return upper_first(q) + ".";
}

bool query_mentions(const std::string& query, const std::string& description) {
    std::string body = query;
    if (!body.empty() && body.back() == '.') body.pop_back();
    body = lower_first(body);
    const auto want = lower_first(description);
    for (std::size_t pos = 0; pos <= body.size();) {
        auto sep = body.find("; ", pos);
        if (sep == std::string::npos) sep = body.size();
        if (body.compare(pos, sep - pos, want) == 0) return true;
        pos = sep + 2;
    }
    return false;
}

}  // namespace

ChatResponse MockChatProvider::complete(const ChatRequest& request) {
    const Json& ctx = request.context;
    const std::string& task = request.task;
    ChatMessage reply;

    if (task == tasks::kDescribeSummary) {
        auto text = ctx.value("summary", std::string{});
        if (text.empty()) text = ctx.value("description", std::string{});
        if (text.empty()) text = "Endpoint " + ctx.value("key", std::string("unknown"));
        reply = text_reply(text);
    } else if (task == tasks::kDescribeQuery) {
        auto d = ctx.value("description", std::string{});
        if (!d.empty() && d.back() == '.') d.pop_back();
        reply = text_reply(d.empty() ? "How do I call " + ctx.value("key", std::string("this endpoint")) + "?"
                                     : "How can I " + lower_first(d) + "?");
    } else if (task == tasks::kCreateServices) {
        const auto domain = ctx.at("domain").get<std::string>();
        const auto count = ctx.at("count").get<std::size_t>();
        auto it = sector_entities().find(domain);
        auto entities = it == sector_entities().end() ? kGenericEntities : it->second;
        boost::random::mt19937_64 rng(fnv1a64(fmt::format("{}/{}/{}", seed_, domain, ctx.value("instance", 0))));
        for (std::size_t i = 0; i + 1 < entities.size(); ++i) {
            boost::random::uniform_int_distribution<std::size_t> pick(i, entities.size() - 1);
            std::swap(entities[i], entities[pick(rng)]);
        }
        Json out = Json::array();
        boost::random::uniform_int_distribution<std::size_t> suffix(0, std::size(kServiceSuffixes) - 1);
        for (std::size_t i = 0; i < count; ++i) {
            const auto& e = entities[i % entities.size()];
            std::string name = title_case(e.singular) + " " + kServiceSuffixes[suffix(rng)];
            if (i >= entities.size()) name += fmt::format(" {}", i / entities.size() + 1);
            out.push_back({{"name", name},
                           {"description", fmt::format("Keeps track of {} for {} companies and reports on their status.",
                                                       e.plural, lower(domain))}});
        }
        reply = text_reply(out.dump(2));
    } else if (task == tasks::kCreateEndpoints) {
        const auto service = ctx.at("service").get<std::string>();
        const auto count = ctx.at("count").get<std::size_t>();
        std::string singular, plural;
        entity_of_service(service, singular, plural);
        std::string collection = slug(plural);
        if (auto last = service.find_last_of(' '); last != std::string::npos &&
                                                   std::all_of(service.begin() + static_cast<std::ptrdiff_t>(last) + 1,
                                                               service.end(), [](unsigned char c) { return std::isdigit(c); })) {
            collection += "-" + service.substr(last + 1);
        }
        const std::string id_param = "{" + camel(singular) + "Id}";
        Json out = Json::array();
        const auto n_templates = std::size(kEndpointTemplates);
        for (std::size_t i = 0; i < count; ++i) {
            const auto& t = kEndpointTemplates[i % n_templates];
            auto path = replace_all(replace_all(t.path, "{c}", collection), "{id}", id_param);
            const std::string article = std::string("aeiou").find(singular.front()) == std::string::npos ? "a" : "an";
            auto description = replace_all(
                replace_all(replace_all(replace_all(t.description, "{a}", article), "{e}", singular), "{p}", plural),
                "{s}", service);
            if (i >= n_templates) {
                path = fmt::format("/v{}{}", i / n_templates + 1, path);
                description += fmt::format(" (version {})", i / n_templates + 1);
            }
            out.push_back({{"verb", t.verb}, {"path", path}, {"description", description}});
        }
        reply = text_reply(out.dump(2));
    } else if (task == tasks::kCreateOpenapi || task == tasks::kRepairOpenapi) {
        reply = text_reply(build_openapi(ctx).dump(2));
    } else if (task == tasks::kCheckOpenapi) {
        reply = text_reply("Yes");
    } else if (task == tasks::kCreateQuery || task == tasks::kQueryFeedback) {
        reply = text_reply(query_from(ctx.at("expected")));
    } else if (task == tasks::kFurtherEndpoints) {
        reply = text_reply("[]");
    } else if (task == tasks::kCheckNecessary) {
        bool yes = query_mentions(ctx.value("query", std::string{}), ctx.value("description", std::string{}));
        reply = text_reply(yes ? "Yes" : "No");
    } else if (task == tasks::kAgent) {
        // Search once with the user query, read the details of the best hit,
        // then answer with the top five search results.
        std::string user_query = ctx.value("query", std::string{});
        const ChatMessage* search_result = nullptr;
        std::size_t tool_results = 0;
        for (const auto& m : request.messages) {
            if (m.role == "user" && user_query.empty()) user_query = m.content;
            if (m.role == "tool") {
                if (tool_results == 0) search_result = &m;
                ++tool_results;
            }
        }
        Json hits = Json::array();
        if (search_result != nullptr) {
            try {
                hits = Json::parse(search_result->content);
            } catch (const nlohmann::json::exception&) {
                hits = Json::array();
            }
        }
        if (tool_results == 0) {
            reply.role = "assistant";
            reply.tool_calls.push_back({"call_1", kSearchTool, Json{{"query", user_query}}});
        } else if (tool_results == 1 && hits.is_array() && !hits.empty()) {
            auto top = EndpointId::parse(hits[0].at("endpoint").get<std::string>());
            reply.role = "assistant";
            reply.tool_calls.push_back(
                {"call_2", kDetailsTool, Json{{"verb", std::string(top.verb())}, {"path", std::string(top.path())}}});
        } else {
            std::vector<EndpointId> answer;
            if (hits.is_array()) {
                for (std::size_t i = 0; i < hits.size() && answer.size() < 5; ++i) {
                    answer.push_back(EndpointId::parse(hits[i].at("endpoint").get<std::string>()));
                }
            }
            reply = text_reply(format_final_answer(answer));
        }
    } else {
        throw ContentError("mock chat provider has no answer for task '" + task + "'");
    }
    return {reply, detail::estimate_usage(request, reply)};
}

std::string MockChatProvider::fingerprint() const {
    return fmt::format("mock-v1/{}", seed_);
}

}  // namespace svcdisc
