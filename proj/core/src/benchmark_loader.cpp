// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "svcdisc/benchmark.hpp"

namespace svcdisc {

namespace {

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError(path.string(), "cannot open file");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw LoadError(fmt::format("{}: byte {}", path.string(), e.byte), e.what());
    }
}

const Json& require(const Json& parent, const char* key, const std::string& where,
                    bool (Json::*check)() const noexcept, const char* kind) {
    auto it = parent.find(key);
    if (it == parent.end()) throw LoadError(where + "." + key, "missing");
    if (!((*it).*check)()) throw LoadError(where + "." + key, fmt::format("must be {}", kind));
    return *it;
}

void check_count(const std::optional<std::size_t>& want, std::size_t have, const std::string& where,
                 const char* what) {
    if (want && *want != have) {
        throw LoadError(where, fmt::format("has {} {}, expected {}", have, what, *want));
    }
}

}  // namespace

std::vector<EndpointId> DomainBenchmark::endpoints() const {
    std::vector<EndpointId> out;
    for (const auto& s : services) {
        for (const auto& e : s.endpoints) out.push_back(e.id());
    }
    return out;
}

const DomainBenchmark& BenchmarkInstance::domain(const std::string& name) const {
    for (const auto& d : domains) {
        if (d.name == name) return d;
    }
    throw NotFoundError("instance has no domain '" + name + "'");
}

std::size_t BenchmarkInstance::query_count() const {
    std::size_t n = 0;
    for (const auto& d : domains) n += d.queries.size();
    return n;
}

Json BenchmarkInstance::to_json() const {
    Json ds = Json::array();
    for (const auto& d : domains) {
        Json services = Json::array();
        for (const auto& s : d.services) services.push_back(s.raw);
        Json queries = Json::array();
        for (const auto& q : d.queries) {
            Json expected = Json::array();
            for (const auto& e : q.expected) expected.push_back(e.str());
            queries.push_back({{"query", q.query}, {"expected", std::move(expected)}});
        }
        ds.push_back({{"name", d.name}, {"services", std::move(services)}, {"queries", std::move(queries)}});
    }
    return Json{{"instance", instance},
                {"fingerprint", fingerprint},
                {"template_version", template_version},
                {"domains", std::move(ds)}};
}

InstanceShape InstanceShape::from(const BenchmarkConfig& config) {
    return {config.domains.size(), config.n_s, config.n_e, config.n_q};
}

double max_pairwise_similarity(const std::vector<QueryCase>& queries, EmbeddingProvider& embedder) {
    if (queries.size() < 2) return 0.0;
    std::vector<std::string> texts;
    for (const auto& q : queries) texts.push_back(q.query);
    auto vectors = embed_texts(texts, embedder);
    double worst = -1.0;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        for (std::size_t j = i + 1; j < vectors.size(); ++j) worst = std::max(worst, cosine(vectors[i], vectors[j]));
    }
    return worst;
}

std::vector<ValidationIssue> validate_instance(const BenchmarkInstance& instance, const InstanceShape& shape,
                                               EmbeddingProvider* embedder, double s_threshold) {
    std::vector<ValidationIssue> issues;
    auto count = [&](const std::optional<std::size_t>& want, std::size_t have, std::string where, const char* what) {
        if (want && *want != have) {
            issues.push_back({std::move(where), fmt::format("has {} {}, expected {}", have, what, *want)});
        }
    };
    count(shape.domains, instance.domains.size(), "domains", "domains");
    for (std::size_t d = 0; d < instance.domains.size(); ++d) {
        const auto& domain = instance.domains[d];
        const auto where = fmt::format("domains[{}]", d);
        count(shape.services_per_domain, domain.services.size(), where + ".services", "services");
        count(shape.queries_per_domain, domain.queries.size(), where + ".queries", "queries");

        std::set<EndpointId> all;
        for (std::size_t s = 0; s < domain.services.size(); ++s) {
            const auto& service = domain.services[s];
            const auto swhere = fmt::format("{}.services[{}]", where, s);
            count(shape.endpoints_per_service, service.endpoints.size(), swhere, "endpoints");
            for (const auto& issue : validate_syntactic(service).errors) {
                issues.push_back({swhere + "." + issue.location, issue.message});
            }
            for (const auto& e : service.endpoints) {
                if (!all.insert(e.id()).second) {
                    issues.push_back({swhere, "endpoint " + e.id().str() + " also appears in another service"});
                }
            }
        }
        for (std::size_t q = 0; q < domain.queries.size(); ++q) {
            const auto& qc = domain.queries[q];
            const auto qwhere = fmt::format("{}.queries[{}]", where, q);
            if (qc.query.empty()) issues.push_back({qwhere + ".query", "query text is empty"});
            if (qc.expected.empty()) issues.push_back({qwhere + ".expected", "expected set is empty"});
            for (std::size_t e = 0; e < qc.expected.size(); ++e) {
                if (!all.contains(qc.expected[e])) {
                    issues.push_back({fmt::format("{}.expected[{}]", qwhere, e),
                                      "unknown endpoint " + qc.expected[e].str()});
                }
            }
        }
        if (embedder != nullptr) {
            double worst = max_pairwise_similarity(domain.queries, *embedder);
            if (worst >= s_threshold) {
                issues.push_back({where + ".queries",
                                  fmt::format("pairwise query similarity {:.4f} reaches the threshold {}", worst,
                                              s_threshold)});
            }
        }
    }
    return issues;
}

BenchmarkInstance instance_from_json(const Json& j, const InstanceShape& shape) {
    if (!j.is_object()) throw LoadError("$", "instance must be an object");
    BenchmarkInstance out;
    out.instance = require(j, "instance", "$", &Json::is_number_unsigned, "a non-negative integer").get<std::size_t>();
    out.fingerprint = j.value("fingerprint", std::string{});
    out.template_version = j.value("template_version", std::string{});
    const auto& domains = require(j, "domains", "$", &Json::is_array, "an array");
    check_count(shape.domains, domains.size(), "$.domains", "domains");

    for (std::size_t d = 0; d < domains.size(); ++d) {
        const auto where = fmt::format("$.domains[{}]", d);
        const auto& dj = domains[d];
        if (!dj.is_object()) throw LoadError(where, "must be an object");
        DomainBenchmark domain;
        domain.name = require(dj, "name", where, &Json::is_string, "a string").get<std::string>();
        const auto& services = require(dj, "services", where, &Json::is_array, "an array");
        check_count(shape.services_per_domain, services.size(), where + ".services", "services");

        std::set<EndpointId> all;
        for (std::size_t s = 0; s < services.size(); ++s) {
            const auto swhere = fmt::format("{}.services[{}]", where, s);
            ServiceDocument doc;
            try {
                doc = service_from_json(services[s]);
            } catch (const Error& e) {
                throw LoadError(swhere, e.what());
            }
            check_count(shape.endpoints_per_service, doc.endpoints.size(), swhere + ".paths", "endpoints");
            for (const auto& e : doc.endpoints) {
                if (!all.insert(e.id()).second) {
                    throw LoadError(swhere + ".paths", "endpoint " + e.id().str() + " also appears in another service");
                }
            }
            domain.services.push_back(std::move(doc));
        }

        const auto& queries = require(dj, "queries", where, &Json::is_array, "an array");
        check_count(shape.queries_per_domain, queries.size(), where + ".queries", "queries");
        for (std::size_t q = 0; q < queries.size(); ++q) {
            const auto qwhere = fmt::format("{}.queries[{}]", where, q);
            const auto& qj = queries[q];
            if (!qj.is_object()) throw LoadError(qwhere, "must be an object");
            QueryCase qc;
            qc.domain = domain.name;
            qc.query = require(qj, "query", qwhere, &Json::is_string, "a string").get<std::string>();
            const auto& expected = require(qj, "expected", qwhere, &Json::is_array, "an array");
            if (expected.empty()) throw LoadError(qwhere + ".expected", "expected set is empty");
            for (std::size_t e = 0; e < expected.size(); ++e) {
                const auto ewhere = fmt::format("{}.expected[{}]", qwhere, e);
                if (!expected[e].is_string()) throw LoadError(ewhere, "must be a string");
                EndpointId id;
                try {
                    id = EndpointId::parse(expected[e].get<std::string>());
                } catch (const ConfigError& err) {
                    throw LoadError(ewhere, err.what());
                }
                if (!all.contains(id)) throw LoadError(ewhere, "unknown endpoint " + id.str());
                if (std::find(qc.expected.begin(), qc.expected.end(), id) == qc.expected.end()) {
                    qc.expected.push_back(std::move(id));
                }
            }
            domain.queries.push_back(std::move(qc));
        }
        out.domains.push_back(std::move(domain));
    }
    return out;
}

BenchmarkInstance load_instance(const std::filesystem::path& path, const InstanceShape& shape) {
    try {
        return instance_from_json(read_json_file(path), shape);
    } catch (const LoadError& e) {
        if (e.location().rfind(path.string(), 0) == 0) throw;
        throw LoadError(path.string() + ":" + e.location(), std::string(e.what()).substr(e.location().size() + 2));
    }
}

void save_instance(const std::filesystem::path& path, const BenchmarkInstance& instance) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << canonical_serialize(instance.to_json());
    }
    std::filesystem::rename(tmp, path);
}

RestBenchData load_restbench(const std::filesystem::path& openapi_path, const std::filesystem::path& queries_path,
                             const std::string& name) {
    RestBenchData out;
    try {
        out.service = service_from_json(read_json_file(openapi_path));
    } catch (const LoadError&) {
        throw;
    } catch (const Error& e) {
        throw LoadError(openapi_path.string(), e.what());
    }
    const std::string domain = name.empty() ? out.service.title : name;
    std::set<EndpointId> all;
    for (const auto& e : out.service.endpoints) all.insert(e.id());

    const Json records = read_json_file(queries_path);
    const auto file = queries_path.string();
    if (!records.is_array()) throw LoadError(file + ":$", "must be an array of query records");
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto where = fmt::format("{}:$[{}]", file, i);
        const auto& r = records[i];
        if (!r.is_object()) throw LoadError(where, "must be an object");
        QueryCase qc;
        qc.domain = domain;
        qc.query = require(r, "query", where, &Json::is_string, "a string").get<std::string>();
        const auto& solution = require(r, "solution", where, &Json::is_array, "an array");
        if (solution.empty()) throw LoadError(where + ".solution", "gold solution is empty");
        for (std::size_t s = 0; s < solution.size(); ++s) {
            const auto swhere = fmt::format("{}.solution[{}]", where, s);
            if (!solution[s].is_string()) throw LoadError(swhere, "must be a string");
            auto text = solution[s].get<std::string>();
            EndpointId id;
            try {
                auto first = text.find_first_not_of(" \t");
                if (first != std::string::npos && text[first] == '/') {
                    id = EndpointId::make("GET", text);
                    out.warnings.push_back(fmt::format("{}: '{}' has no verb; read as GET", swhere, text));
                    spdlog::warn("{}", out.warnings.back());
                } else {
                    id = EndpointId::parse(text);
                }
            } catch (const ConfigError& e) {
                throw LoadError(swhere, e.what());
            }
            if (!all.contains(id)) throw LoadError(swhere, "unknown endpoint " + id.str());
            if (std::find(qc.expected.begin(), qc.expected.end(), id) == qc.expected.end()) qc.expected.push_back(id);
        }
        out.queries.push_back(std::move(qc));
    }
    return out;
}

}  // namespace svcdisc
