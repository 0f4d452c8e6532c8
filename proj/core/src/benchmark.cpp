// SPDX-License-Identifier: Apache-2.0
#include "svcdisc/benchmark.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <future>
#include <map>
#include <numeric>
#include <set>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "svcdisc/hashing.hpp"

namespace svcdisc {

namespace {

std::string trim_copy(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

std::string bullet_list(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& i : items) out += "- " + i + "\n";
    return out.empty() ? "(none)\n" : out;
}

std::string ids_text(const std::vector<EndpointId>& ids) {
    std::vector<std::string> s;
    for (const auto& id : ids) s.push_back(id.str());
    return bullet_list(s);
}

Json ids_json(const std::vector<EndpointId>& ids) {
    Json out = Json::array();
    for (const auto& id : ids) out.push_back(id.str());
    return out;
}

std::string openapis_text(const std::vector<ServiceDocument>& docs) {
    std::string out;
    for (const auto& d : docs) out += d.raw.dump(2) + "\n\n";
    return out;
}

std::map<EndpointId, std::string> descriptions(const std::vector<ServiceDocument>& docs) {
    std::map<EndpointId, std::string> out;
    for (const auto& d : docs) {
        for (const auto& e : d.endpoints) out.emplace(e.id(), e.description);
    }
    return out;
}

Json described(const std::vector<EndpointId>& ids, const std::map<EndpointId, std::string>& desc) {
    Json out = Json::array();
    for (const auto& id : ids) {
        auto it = desc.find(id);
        out.push_back({{"endpoint", id.str()}, {"description", it == desc.end() ? "" : it->second}});
    }
    return out;
}

Json parse_json_answer(const std::string& content) {
    return Json::parse(strip_code_fence(content));
}

Json sketch_json(const std::vector<EndpointSketch>& endpoints) {
    Json out = Json::array();
    for (const auto& e : endpoints) out.push_back({{"verb", e.verb}, {"path", e.path}, {"description", e.description}});
    return out;
}

std::vector<EndpointSketch> sketches_from(const Json& j) {
    std::vector<EndpointSketch> out;
    for (const auto& e : j) {
        out.push_back({e.at("verb").get<std::string>(), e.at("path").get<std::string>(),
                       e.at("description").get<std::string>()});
    }
    return out;
}

void write_atomically(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << text;
        if (!out) throw Error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void BenchmarkConfig::validate() const {
    if (domains.empty()) throw ConfigError("benchmark needs at least one domain");
    if (n_s == 0 || n_e == 0 || n_q == 0) throw ConfigError("n_s, n_e and n_q must be positive");
    if (instances == 0) throw ConfigError("instances must be positive");
    if (!(s_threshold > 0.0 && s_threshold < 1.0)) throw ConfigError("s_threshold must lie in (0, 1)");
    if (!(sigma >= 0.0)) throw ConfigError("sigma must be non-negative");
    if (parallelism == 0) throw ConfigError("parallelism must be at least 1");
    std::set<std::string> slugs;
    for (const auto& d : domains) {
        if (!slugs.insert(domain_slug(d)).second) throw ConfigError("duplicate domain '" + d + "'");
    }
}

Json BenchmarkConfig::to_json() const {
    return Json{{"domains", domains},
                {"n_s", n_s},
                {"n_e", n_e},
                {"n_q", n_q},
                {"mu", mu},
                {"sigma", sigma},
                {"s_threshold", s_threshold},
                {"instances", instances},
                {"seed", seed},
                {"budgets",
                 {{"repair_rounds", budgets.repair_rounds},
                  {"regenerations", budgets.regenerations},
                  {"query_redraws", budgets.query_redraws},
                  {"feedback_rounds", budgets.feedback_rounds}}}};
}

BenchmarkConfig BenchmarkConfig::from_json(const Json& j) {
    BenchmarkConfig c;
    c.domains = j.value("domains", c.domains);
    c.n_s = j.value("n_s", c.n_s);
    c.n_e = j.value("n_e", c.n_e);
    c.n_q = j.value("n_q", c.n_q);
    c.mu = j.value("mu", c.mu);
    c.sigma = j.value("sigma", c.sigma);
    c.s_threshold = j.value("s_threshold", c.s_threshold);
    c.instances = j.value("instances", c.instances);
    c.seed = j.value("seed", c.seed);
    c.parallelism = j.value("parallelism", c.parallelism);
    if (auto b = j.find("budgets"); b != j.end()) {
        c.budgets.repair_rounds = b->value("repair_rounds", c.budgets.repair_rounds);
        c.budgets.regenerations = b->value("regenerations", c.budgets.regenerations);
        c.budgets.query_redraws = b->value("query_redraws", c.budgets.query_redraws);
        c.budgets.feedback_rounds = b->value("feedback_rounds", c.budgets.feedback_rounds);
    }
    c.validate();
    return c;
}

std::string domain_slug(const std::string& domain) {
    std::string out;
    for (unsigned char c : domain) {
        if (std::isalnum(c)) {
            out += static_cast<char>(std::tolower(c));
        } else if (!out.empty() && out.back() != '-') {
            out += '-';
        }
    }
    while (!out.empty() && out.back() == '-') out.pop_back();
    return out.empty() ? "domain" : out;
}

std::size_t clamp_expected_size(double draw, std::size_t n_all) {
    if (n_all == 0) throw ConfigError("no endpoints to draw from");
    auto r = std::llround(draw);
    if (r < 1) return 1;
    return std::min(static_cast<std::size_t>(r), n_all);
}

std::optional<bool> parse_yes_no(std::string_view answer) {
    std::string word;
    for (char c : trim_copy(answer)) {
        if (!std::isalpha(static_cast<unsigned char>(c))) break;
        word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (word == "yes") return true;
    if (word == "no") return false;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Generator

BenchmarkGenerator::BenchmarkGenerator(BenchmarkConfig config, ChatProvider& llm, EmbeddingProvider& embedder,
                                       const PromptTemplates& templates)
    : config_(std::move(config)), llm_(llm), embedder_(embedder), templates_(templates) {
    config_.validate();
    templates_.validate();
}

std::string BenchmarkGenerator::fingerprint() const {
    Json cfg = config_.to_json();
    cfg.erase("instances");
    return fingerprint_of(Json{{"benchmark", std::move(cfg)},
                               {"template_version", templates_.version},
                               {"llm", llm_.fingerprint()},
                               {"embedder", embedder_.config().fingerprint()}});
}

ChatResponse BenchmarkGenerator::ask(const std::string& task, std::vector<ChatMessage> messages, Json context) {
    ChatRequest request;
    request.task = task;
    request.messages = std::move(messages);
    request.context = std::move(context);
    return llm_.complete(request);
}

std::vector<ServiceSketch> BenchmarkGenerator::create_services(const std::string& domain, std::size_t instance) {
    const auto prompt = render_template(templates_.get("create_services"),
                                        {{"domain", domain}, {"count", std::to_string(config_.n_s)}});
    const Json context{{"domain", domain}, {"count", config_.n_s}, {"instance", instance}};
    std::string problem;
    for (std::size_t attempt = 0; attempt <= config_.budgets.regenerations; ++attempt) {
        auto reply = ask(tasks::kCreateServices, {{"user", prompt, {}, {}}}, context);
        try {
            auto j = parse_json_answer(reply.message.content);
            std::vector<ServiceSketch> out;
            std::set<std::string> names;
            for (const auto& s : j) {
                out.push_back({trim_copy(s.at("name").get<std::string>()),
                               trim_copy(s.value("description", std::string{}))});
                if (out.back().name.empty() || !names.insert(out.back().name).second) {
                    throw ContentError("empty or duplicate service name");
                }
            }
            if (out.size() == config_.n_s) return out;
            problem = fmt::format("got {} services, expected {}", out.size(), config_.n_s);
        } catch (const nlohmann::json::exception& e) {
            problem = std::string("unusable service list: ") + e.what();
        } catch (const ContentError& e) {
            problem = e.what();
        }
        spdlog::info("{}: regenerating services ({})", domain, problem);
    }
    throw GenerationError(fmt::format("{}: services not created after {} attempts: {}", domain,
                                      config_.budgets.regenerations + 1, problem));
}

std::vector<EndpointSketch> BenchmarkGenerator::create_endpoints(const std::string& domain,
                                                                 const ServiceSketch& service,
                                                                 const std::vector<EndpointId>& taken) {
    const auto prompt = render_template(templates_.get("create_endpoints"),
                                        {{"domain", domain},
                                         {"service", service.name},
                                         {"description", service.description},
                                         {"count", std::to_string(config_.n_e)}});
    const Json context{{"domain", domain},
                       {"service", service.name},
                       {"description", service.description},
                       {"count", config_.n_e}};
    const std::set<EndpointId> reserved(taken.begin(), taken.end());
    std::string problem;
    for (std::size_t attempt = 0; attempt <= config_.budgets.regenerations; ++attempt) {
        auto reply = ask(tasks::kCreateEndpoints, {{"user", prompt, {}, {}}}, context);
        try {
            auto j = parse_json_answer(reply.message.content);
            std::vector<EndpointSketch> out;
            std::set<EndpointId> seen;
            for (const auto& e : j) {
                EndpointSketch s{e.at("verb").get<std::string>(), trim_copy(e.at("path").get<std::string>()),
                                 trim_copy(e.value("description", std::string{}))};
                auto id = s.id();
                s.verb = std::string(id.verb());
                if (s.path.empty() || s.path.front() != '/') throw ContentError("path without leading '/': " + s.path);
                if (!seen.insert(id).second) throw ContentError("duplicate endpoint " + id.str());
                if (reserved.contains(id)) throw ContentError("endpoint " + id.str() + " already used by another service");
                out.push_back(std::move(s));
            }
            if (out.size() == config_.n_e) return out;
            problem = fmt::format("got {} endpoints, expected {}", out.size(), config_.n_e);
        } catch (const nlohmann::json::exception& e) {
            problem = std::string("unusable endpoint list: ") + e.what();
        } catch (const ContentError& e) {
            problem = e.what();
        } catch (const ConfigError& e) {
            problem = e.what();
        }
        spdlog::info("{} / {}: regenerating endpoints ({})", domain, service.name, problem);
    }
    throw GenerationError(fmt::format("{} / {}: endpoints not created after {} attempts: {}", domain, service.name,
                                      config_.budgets.regenerations + 1, problem));
}

ServiceDocument BenchmarkGenerator::create_openapi(const std::string& domain, const ServiceSketch& service,
                                                   const std::vector<EndpointSketch>& endpoints) {
    if (endpoints.empty()) throw ConfigError("create_openapi needs at least one endpoint");
    std::vector<std::string> lines;
    std::set<EndpointId> wanted;
    for (const auto& e : endpoints) {
        lines.push_back(e.id().str() + ": " + e.description);
        wanted.insert(e.id());
    }
    const auto prompt = render_template(templates_.get("create_openapi"), {{"domain", domain},
                                                                           {"service", service.name},
                                                                           {"description", service.description},
                                                                           {"endpoints", bullet_list(lines)}});
    const Json context{{"domain", domain},
                       {"service", service.name},
                       {"description", service.description},
                       {"endpoints", sketch_json(endpoints)}};

    // Every reason the answer is not acceptable yet; empty when accepted.
    auto review = [&](const std::string& content, ServiceDocument& doc) {
        std::vector<std::string> problems;
        try {
            doc = parse_service(strip_code_fence(content));
        } catch (const Error& e) {
            return std::vector<std::string>{e.what()};
        }
        std::set<EndpointId> have;
        for (const auto& e : doc.endpoints) have.insert(e.id());
        for (const auto& id : wanted) {
            if (!have.contains(id)) problems.push_back("missing endpoint " + id.str());
        }
        for (const auto& id : have) {
            if (!wanted.contains(id)) problems.push_back("unexpected endpoint " + id.str());
        }
        for (const auto& issue : validate_syntactic(doc).errors) {
            problems.push_back(issue.location + ": " + issue.message);
        }
        if (!problems.empty()) return problems;

        auto check_prompt = render_template(templates_.get("check_openapi"),
                                            {{"domain", domain}, {"openapi", doc.raw.dump(2)}});
        auto verdict = ask(tasks::kCheckOpenapi, {{"user", check_prompt, {}, {}}},
                           Json{{"domain", domain}, {"service", service.name}});
        auto yes = parse_yes_no(verdict.message.content);
        if (!yes.value_or(false)) {
            problems.push_back("review: " + trim_copy(verdict.message.content));
        }
        return problems;
    };

    std::vector<std::string> problems;
    for (std::size_t attempt = 0; attempt <= config_.budgets.regenerations; ++attempt) {
        std::vector<ChatMessage> messages{{"user", prompt, {}, {}}};
        auto reply = ask(tasks::kCreateOpenapi, messages, context);
        for (std::size_t round = 0;; ++round) {
            ServiceDocument doc;
            problems = review(reply.message.content, doc);
            if (problems.empty()) return doc;
            if (round == config_.budgets.repair_rounds) break;
            spdlog::info("{} / {}: repairing OpenAPI ({} problems)", domain, service.name, problems.size());
            messages.push_back({"assistant", reply.message.content, {}, {}});
            messages.push_back({"user", render_template(templates_.get("repair_openapi"), {{"errors", bullet_list(problems)}}),
                                {}, {}});
            Json repair_context = context;
            repair_context["errors"] = problems;
            reply = ask(tasks::kRepairOpenapi, messages, repair_context);
        }
        spdlog::info("{} / {}: regenerating OpenAPI", domain, service.name);
    }
    throw GenerationError(fmt::format("{} / {}: no acceptable OpenAPI after {} attempts; last problems: {}", domain,
                                      service.name, config_.budgets.regenerations + 1,
                                      problems.empty() ? "" : problems.front()));
}

std::vector<EndpointId> BenchmarkGenerator::check_necessary(const std::vector<ServiceDocument>& openapis,
                                                            const std::string& query,
                                                            const std::vector<EndpointId>& extended) {
    if (extended.empty()) throw ConfigError("check_necessary needs at least one endpoint");
    const auto desc = descriptions(openapis);
    const auto docs_text = openapis_text(openapis);
    std::vector<EndpointId> out;
    for (const auto& id : extended) {
        auto it = desc.find(id);
        const Json context{{"query", query},
                           {"endpoint", id.str()},
                           {"description", it == desc.end() ? "" : it->second}};
        std::vector<ChatMessage> messages{
            {"user",
             render_template(templates_.get("check_necessary"), {{"openapis", docs_text},
                                                                 {"query", query},
                                                                 {"extended", ids_text(extended)},
                                                                 {"endpoint", id.str()}}),
             {},
             {}}};
        auto reply = ask(tasks::kCheckNecessary, messages, context);
        auto answer = parse_yes_no(reply.message.content);
        if (!answer) {
            messages.push_back({"assistant", reply.message.content, {}, {}});
            messages.push_back({"user", "Answer with \"Yes\" or \"No\" only.", {}, {}});
            reply = ask(tasks::kCheckNecessary, messages, context);
            answer = parse_yes_no(reply.message.content);
        }
        if (!answer) {
            throw ParseError("check_necessary " + id.str(),
                             "expected Yes or No, got '" + trim_copy(reply.message.content) + "'");
        }
        if (*answer) out.push_back(id);
    }
    return out;
}

std::string BenchmarkGenerator::create_query(const std::vector<ServiceDocument>& openapis,
                                             const std::vector<EndpointId>& expected) {
    if (expected.empty()) throw ConfigError("create_query needs at least one expected endpoint");
    const auto desc = descriptions(openapis);
    const auto docs_text = openapis_text(openapis);
    std::set<EndpointId> all;
    for (const auto& [id, _] : desc) all.insert(id);
    const std::set<EndpointId> expected_set(expected.begin(), expected.end());

    std::vector<ChatMessage> messages{
        {"user",
         render_template(templates_.get("create_query"), {{"openapis", docs_text}, {"expected", ids_text(expected)}}),
         {},
         {}}};
    Json context{{"expected", described(expected, desc)}};
    std::string task = tasks::kCreateQuery;

    for (std::size_t round = 0; round <= config_.budgets.feedback_rounds; ++round) {
        auto query = trim_copy(strip_code_fence(ask(task, messages, context).message.content));
        if (query.empty()) throw ContentError("empty query from create_query");

        auto further_reply = ask(tasks::kFurtherEndpoints,
                                 {{"user",
                                   render_template(templates_.get("further_endpoints"), {{"openapis", docs_text},
                                                                                         {"query", query},
                                                                                         {"expected", ids_text(expected)}}),
                                   {},
                                   {}}},
                                 Json{{"query", query}, {"expected", ids_json(expected)}});
        std::vector<EndpointId> extended = expected;
        try {
            for (const auto& item : parse_json_answer(further_reply.message.content)) {
                auto id = EndpointId::parse(item.get<std::string>());
                if (!all.contains(id)) {
                    spdlog::warn("further endpoint {} is not part of the domain; ignored", id.str());
                    continue;
                }
                if (std::find(extended.begin(), extended.end(), id) == extended.end()) extended.push_back(id);
            }
        } catch (const nlohmann::json::exception& e) {
            spdlog::warn("unusable further-endpoints answer ({}); using the expected set only", e.what());
        } catch (const ConfigError& e) {
            spdlog::warn("unusable further-endpoints entry ({}); ignored", e.what());
        }

        auto necessary = check_necessary(openapis, query, extended);
        const std::set<EndpointId> necessary_set(necessary.begin(), necessary.end());
        if (necessary_set == expected_set) return query;

        std::vector<EndpointId> additional, absent;
        for (const auto& id : necessary) {
            if (!expected_set.contains(id)) additional.push_back(id);
        }
        for (const auto& id : expected) {
            if (!necessary_set.contains(id)) absent.push_back(id);
        }
        messages.push_back({"assistant", query, {}, {}});
        messages.push_back({"user",
                            render_template(templates_.get("query_feedback"), {{"expected", ids_text(expected)},
                                                                               {"additional", ids_text(additional)},
                                                                               {"absent", ids_text(absent)}}),
                            {},
                            {}});
        context["additional"] = ids_json(additional);
        context["absent"] = ids_json(absent);
        task = tasks::kQueryFeedback;
    }
    throw GenerationError(fmt::format("query for {} endpoints did not converge after {} feedback rounds",
                                      expected.size(), config_.budgets.feedback_rounds));
}

void BenchmarkGenerator::create_queries(const std::string& domain, const std::vector<ServiceDocument>& openapis,
                                        std::size_t instance, std::vector<QueryCase>& accepted,
                                        const std::function<void()>& on_accept) {
    std::vector<EndpointId> e_all;
    for (const auto& d : openapis) {
        for (const auto& e : d.endpoints) e_all.push_back(e.id());
    }
    if (e_all.empty()) throw ConfigError(domain + ": no endpoints to draw queries from");

    std::vector<EmbeddingVector> accepted_vectors;
    for (const auto& q : accepted) accepted_vectors.push_back(embed_texts({q.query}, embedder_).front());

    for (std::size_t slot = accepted.size(); slot < config_.n_q; ++slot) {
        bool done = false;
        std::string problem;
        for (std::size_t attempt = 0; attempt < config_.budgets.query_redraws && !done; ++attempt) {
            auto seed = fnv1a64(fmt::format("{}/{}/{}/{}/{}", config_.seed, instance, domain, slot, attempt));
            boost::random::mt19937_64 rng(seed);
            boost::random::normal_distribution<double> normal(config_.mu, config_.sigma);
            auto size = clamp_expected_size(normal(rng), e_all.size());

            std::vector<std::size_t> order(e_all.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            for (std::size_t i = 0; i < size; ++i) {
                boost::random::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
                std::swap(order[i], order[pick(rng)]);
            }
            order.resize(size);
            std::sort(order.begin(), order.end());
            std::vector<EndpointId> expected;
            for (auto i : order) expected.push_back(e_all[i]);

            std::string query;
            try {
                query = create_query(openapis, expected);
            } catch (const GenerationError& e) {
                problem = e.what();
                continue;
            }
            auto vec = embed_texts({query}, embedder_).front();
            double worst = 0.0;
            for (const auto& other : accepted_vectors) worst = std::max(worst, cosine(vec, other));
            if (worst >= config_.s_threshold) {
                problem = fmt::format("similarity {:.3f} to an accepted query", worst);
                continue;
            }
            accepted.push_back({query, expected, domain});
            accepted_vectors.push_back(std::move(vec));
            if (on_accept) on_accept();
            done = true;
        }
        if (!done) {
            throw GenerationError(fmt::format("{}: query {} not accepted after {} draws: {}", domain, slot,
                                              config_.budgets.query_redraws, problem));
        }
    }
}

DomainBenchmark BenchmarkGenerator::create_domain(const std::string& domain, std::size_t instance,
                                                  const std::optional<std::filesystem::path>& checkpoint_file) {
    Json state{{"domain", domain},
               {"instance", instance},
               {"fingerprint", fingerprint()},
               {"services", Json::array()},
               {"endpoints", Json::array()},
               {"openapis", Json::array()},
               {"queries", Json::array()}};
    if (checkpoint_file && std::filesystem::exists(*checkpoint_file)) {
        std::ifstream in(*checkpoint_file);
        Json stored = Json::parse(in);
        if (stored.value("fingerprint", std::string{}) != state["fingerprint"] ||
            stored.value("instance", std::size_t{0}) != instance) {
            throw ConfigError("checkpoint " + checkpoint_file->string() + " was written by a different configuration");
        }
        state = std::move(stored);
        spdlog::info("{}: resuming from checkpoint", domain);
    }
    auto save = [&] {
        if (checkpoint_file) write_atomically(*checkpoint_file, state.dump(1) + "\n");
    };

    std::vector<ServiceSketch> services;
    if (state["services"].empty()) {
        services = create_services(domain, instance);
        for (const auto& s : services) state["services"].push_back({{"name", s.name}, {"description", s.description}});
        save();
    } else {
        for (const auto& s : state["services"]) {
            services.push_back({s.at("name").get<std::string>(), s.at("description").get<std::string>()});
        }
    }

    std::vector<EndpointId> taken;
    for (std::size_t i = 0; i < services.size(); ++i) {
        if (state["endpoints"].size() <= i) {
            state["endpoints"].push_back(sketch_json(create_endpoints(domain, services[i], taken)));
            save();
        }
        for (const auto& e : sketches_from(state["endpoints"][i])) taken.push_back(e.id());
    }

    std::vector<ServiceDocument> docs;
    for (std::size_t i = 0; i < services.size(); ++i) {
        if (state["openapis"].size() <= i) {
            auto doc = create_openapi(domain, services[i], sketches_from(state["endpoints"][i]));
            state["openapis"].push_back(doc.raw);
            save();
        }
        docs.push_back(service_from_json(state["openapis"][i]));
    }

    std::vector<QueryCase> queries;
    for (const auto& q : state["queries"]) {
        QueryCase c{q.at("query").get<std::string>(), {}, domain};
        for (const auto& e : q.at("expected")) c.expected.push_back(EndpointId::parse(e.get<std::string>()));
        queries.push_back(std::move(c));
    }
    create_queries(domain, docs, instance, queries, [&] {
        const auto& q = queries.back();
        state["queries"].push_back({{"query", q.query}, {"expected", ids_json(q.expected)}});
        save();
    });

    return DomainBenchmark{domain, std::move(docs), std::move(queries)};
}

BenchmarkInstance BenchmarkGenerator::create_benchmark(std::size_t instance,
                                                       const std::optional<std::filesystem::path>& checkpoint_dir) {
    BenchmarkInstance out;
    out.instance = instance;
    out.fingerprint = fingerprint();
    out.template_version = templates_.version;
    out.domains.resize(config_.domains.size());

    auto checkpoint_for = [&](const std::string& domain) -> std::optional<std::filesystem::path> {
        if (!checkpoint_dir) return std::nullopt;
        return *checkpoint_dir / fmt::format("instance-{}", instance) / (domain_slug(domain) + ".json");
    };

    try {
        for (std::size_t start = 0; start < config_.domains.size(); start += config_.parallelism) {
            auto end = std::min(config_.domains.size(), start + config_.parallelism);
            std::vector<std::future<DomainBenchmark>> wave;
            for (std::size_t d = start; d < end; ++d) {
                const auto& name = config_.domains[d];
                wave.push_back(std::async(config_.parallelism > 1 ? std::launch::async : std::launch::deferred,
                                          [&, name] { return create_domain(name, instance, checkpoint_for(name)); }));
            }
            // Drain the whole wave before rethrowing so no task outlives this frame.
            std::exception_ptr first_error;
            for (std::size_t d = start; d < end; ++d) {
                try {
                    out.domains[d] = wave[d - start].get();
                } catch (...) {
                    if (!first_error) first_error = std::current_exception();
                }
            }
            if (first_error) std::rethrow_exception(first_error);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        if (!checkpoint_dir) throw;
        throw ResumableError(e.what(), checkpoint_dir->string());
    }
    return out;
}

}  // namespace svcdisc
