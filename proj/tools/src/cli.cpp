// SPDX-License-Identifier: Apache-2.0
#include "svcdisc/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "svcdisc/agent.hpp"
#include "svcdisc/benchmark.hpp"
#include "svcdisc/config.hpp"
#include "svcdisc/grid.hpp"
#include "svcdisc/retrieval.hpp"
#include "svcdisc/tokenizer.hpp"
#include "svcdisc/vector_index.hpp"

namespace svcdisc::cli {

namespace {

namespace fs = std::filesystem;

constexpr std::size_t kDefaultWindow = 8191;

/// Raised while turning flags into a config; reported as a usage error.
class UsageError : public Error {
public:
    using Error::Error;
};

struct Globals {
    std::string config_path;
    bool mock = false;
    std::optional<std::size_t> jobs;
    std::optional<std::string> strategy;
    std::optional<std::string> model;
    std::vector<std::size_t> ks;
    std::optional<std::size_t> chunk_size;
    std::optional<std::size_t> overlap;
    std::string out;
    std::string benchmark;
    bool verbose = false;
};

struct IndexArgs {
    std::vector<std::string> docs;
    std::string chunks;
};

struct QueryArgs {
    std::string text;
    std::string index;
    bool json = false;
};

struct AgentArgs {
    std::string text;
    std::vector<std::string> docs;
    std::string domain;
    std::string search_k;
    std::optional<std::size_t> max_iterations;
    std::string trace;
};

struct GenerateArgs {
    std::optional<std::size_t> instances;
    std::optional<std::size_t> instance;
    std::string checkpoint;
    std::vector<std::string> domains;
    std::optional<std::uint64_t> seed;
};

struct ValidateArgs {
    bool no_shape = false;
    bool no_similarity = false;
};

struct RunArgs {
    std::vector<std::string> restbench;
    std::vector<std::string> agent_ks;
};

struct TokensArgs {
    std::vector<std::string> files;
};

struct ReportArgs {
    std::string in;
    std::string rows;
    std::string format = "text";
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError(path.string(), "cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

std::vector<ServiceDocument> load_docs(const std::vector<std::string>& paths) {
    std::vector<ServiceDocument> docs;
    for (const auto& p : paths) {
        try {
            docs.push_back(parse_service(read_file(p)));
        } catch (const ParseError& e) {
            std::string message = e.what();
            if (!e.location().empty()) message = message.substr(e.location().size() + 2);
            throw LoadError(p + ":" + e.location(), message);
        } catch (const LoadError&) {
            throw;
        } catch (const Error& e) {
            throw LoadError(p, e.what());
        }
    }
    return docs;
}

std::optional<std::size_t> parse_search_k(const std::string& text) {
    if (text == "all") return std::nullopt;
    try {
        std::size_t pos = 0;
        auto v = std::stoul(text, &pos);
        if (pos == text.size() && v > 0) return v;
    } catch (const std::logic_error&) {
    }
    throw UsageError("expected a positive integer or \"all\", got '" + text + "'");
}

ToolkitConfig build_config(const Globals& g) {
    ToolkitConfig cfg = g.config_path.empty() ? ToolkitConfig{} : ToolkitConfig::load(g.config_path);
    cfg.apply_environment();
    try {
        if (g.model) {
            cfg.embedding.model = *g.model;
            cfg.grid.models.clear();
        }
        if (g.strategy) {
            const auto size = g.chunk_size.value_or(cfg.strategy.chunk_size > 0 ? cfg.strategy.chunk_size : kDefaultWindow);
            cfg.strategy = ChunkingStrategy::from_name(*g.strategy, size, g.overlap.value_or(0));
            if ((g.chunk_size || g.overlap) && !cfg.strategy.uses_token_windows()) {
                throw UsageError("--chunk-size and --overlap apply to token-chunking strategies only");
            }
        } else if (g.chunk_size || g.overlap) {
            if (!cfg.strategy.uses_token_windows()) {
                throw UsageError("--chunk-size and --overlap apply to token-chunking strategies only");
            }
            if (g.chunk_size) cfg.strategy.chunk_size = *g.chunk_size;
            if (g.overlap) cfg.strategy.overlap = *g.overlap;
            cfg.strategy.validate();
        }
        if (g.ks.size() == 1) cfg.k = g.ks.front();
        if (g.jobs) cfg.jobs = *g.jobs;
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }
    if (g.mock) cfg.use_mock_providers();
    return cfg;
}

std::size_t single_k(const Globals& g, const ToolkitConfig& cfg) {
    if (g.ks.size() > 1) throw UsageError("this command takes a single --k");
    return cfg.k;
}

int cmd_index(const Globals& g, const IndexArgs& a, std::ostream& out) {
    auto cfg = build_config(g);
    if (g.out.empty()) throw UsageError("index needs --out");
    single_k(g, cfg);
    const auto docs = load_docs(a.docs);
    std::unique_ptr<ChatProvider> llm;
    if (cfg.strategy.uses_llm()) llm = make_chat_provider(cfg.llm);
    auto embedder = make_embedding_provider(cfg.embedding);
    const auto views = chunk_corpus(docs, cfg.strategy, llm.get(), {cfg.jobs});
    auto snapshot = index_chunks(views, cfg.strategy, *embedder);
    snapshot.config_fingerprint = emit_config_fingerprint(cfg);
    save_snapshot(fs::path(g.out), snapshot);
    if (!a.chunks.empty()) {
        std::ostringstream ss;
        write_chunks_jsonl(ss, views, cfg.strategy);
        write_file(a.chunks, ss.str());
    }
    std::size_t chunks = 0;
    for (const auto& v : views) chunks += v.chunks.size();
    out << fmt::format("indexed {} chunks in {} view(s) with {} -> {}\nfingerprint {}\n", chunks, views.size(),
                       cfg.strategy.label(), g.out, snapshot.config_fingerprint);
    return kExitOk;
}

int cmd_query(const Globals& g, const QueryArgs& a, std::ostream& out) {
    auto cfg = build_config(g);
    const auto k = single_k(g, cfg);
    const auto snapshot = load_snapshot(fs::path(a.index));
    auto embedder = make_embedding_provider(cfg.embedding);
    RetrievalResult result;
    if (snapshot.has_view("main")) {
        result = retrieve(a.text, k, snapshot.view("main"), *embedder);
    } else if (std::all_of(kDefaultCraftOrder.begin(), kDefaultCraftOrder.end(),
                           [&](const std::string& v) { return snapshot.has_view(v); })) {
        const auto pfp = embedder->config().fingerprint();
        if (snapshot.view("summary").provider_fingerprint() != pfp) {
            throw ContractError("index was built with a different embedding provider");
        }
        result = craft_retrieve(a.text, k, snapshot, *embedder);
    } else {
        throw LoadError(a.index, "snapshot has neither a main view nor the three CRAFT views");
    }
    if (a.json) {
        out << canonical_serialize(result.to_json(a.text, snapshot.config_fingerprint));
    } else {
        for (const auto& e : result.endpoints) out << e.str() << "\n";
    }
    return kExitOk;
}

int cmd_agent(const Globals& g, const AgentArgs& a, std::ostream& out, std::ostream& err) {
    auto cfg = build_config(g);
    std::vector<ServiceDocument> docs;
    if (!a.docs.empty()) {
        docs = load_docs(a.docs);
    } else if (!g.benchmark.empty() && !a.domain.empty()) {
        docs = load_instance(g.benchmark).domain(a.domain).services;
    } else {
        throw UsageError("agent needs --docs or --benchmark with --domain");
    }
    AgentConfig agent = cfg.agent;
    if (!a.search_k.empty()) agent.k_per_search = parse_search_k(a.search_k);
    if (a.max_iterations) agent.max_iterations = *a.max_iterations;
    agent.validate();

    auto llm = make_chat_provider(cfg.llm);
    auto embedder = make_embedding_provider(cfg.embedding);
    const auto summary = ChunkingStrategy::from_name("summary");
    const auto snapshot = index_chunks(chunk_corpus(docs, summary, llm.get(), {cfg.jobs}), summary, *embedder);
    const DiscoveryTools tools(snapshot.view("main"), docs, *embedder, agent.k_per_search);
    auto write_trace = [&](const AgentTrace& trace) {
        if (!a.trace.empty()) write_file(a.trace, canonical_serialize(trace.to_json()));
    };
    try {
        auto result = run_agent(a.text, agent, tools, *llm);
        write_trace(result.trace);
        for (const auto& e : result.endpoints) out << e.str() << "\n";
        for (const auto& e : result.trace.dropped) err << "dropped (never surfaced by a tool): " << e.str() << "\n";
    } catch (const AgentIterationLimit& e) {
        write_trace(e.trace());
        throw;
    } catch (const AgentFormatError& e) {
        write_trace(e.trace());
        throw;
    }
    return kExitOk;
}

int cmd_generate(const Globals& g, const GenerateArgs& a, std::ostream& out) {
    auto cfg = build_config(g);
    if (g.out.empty()) throw UsageError("bench generate needs --out");
    if (!a.domains.empty()) cfg.benchmark.domains = a.domains;
    if (a.instances) cfg.benchmark.instances = *a.instances;
    if (a.seed) cfg.benchmark.seed = *a.seed;
    cfg.benchmark.parallelism = cfg.jobs;
    try {
        cfg.benchmark.validate();
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }
    auto llm = make_chat_provider(cfg.llm);
    auto embedder = make_embedding_provider(cfg.embedding);
    BenchmarkGenerator generator(cfg.benchmark, *llm, *embedder);
    std::optional<fs::path> checkpoint;
    if (!a.checkpoint.empty()) checkpoint = a.checkpoint;

    std::vector<std::size_t> which;
    if (a.instance) {
        which.push_back(*a.instance);
    } else {
        for (std::size_t i = 0; i < cfg.benchmark.instances; ++i) which.push_back(i);
    }
    for (auto i : which) {
        auto instance = generator.create_benchmark(i, checkpoint);
        const auto path = fs::path(g.out) / fmt::format("instance-{}.json", i);
        save_instance(path, instance);
        out << fmt::format("instance {}: {} domains, {} queries -> {}\n", i, instance.domains.size(),
                           instance.query_count(), path.string());
    }
    out << "fingerprint " << generator.fingerprint() << "\n";
    return kExitOk;
}

int cmd_validate(const Globals& g, const ValidateArgs& a, std::ostream& out, std::ostream& err) {
    auto cfg = build_config(g);
    if (g.benchmark.empty()) throw UsageError("bench validate needs --benchmark");
    const auto shape = a.no_shape ? InstanceShape{} : InstanceShape::from(cfg.benchmark);
    const auto instance = load_instance(g.benchmark, shape);
    std::unique_ptr<EmbeddingProvider> embedder;
    if (!a.no_similarity) embedder = make_embedding_provider(cfg.embedding);
    const auto issues = validate_instance(instance, shape, embedder.get(), cfg.benchmark.s_threshold);
    for (const auto& issue : issues) err << g.benchmark << ":$." << issue.location << ": " << issue.message << "\n";
    if (!issues.empty()) return kExitDomainError;
    out << fmt::format("ok: {} domains, {} queries\n", instance.domains.size(), instance.query_count());
    return kExitOk;
}

int cmd_run(const Globals& g, const RunArgs& a, std::ostream& out) {
    auto cfg = build_config(g);
    if (g.out.empty()) throw UsageError("bench run needs --out");
    std::vector<DomainBenchmark> domains;
    if (!a.restbench.empty()) {
        if (a.restbench.size() != 2) throw UsageError("--restbench takes an OpenAPI file and a query file");
        auto data = load_restbench(a.restbench[0], a.restbench[1]);
        DomainBenchmark d;
        d.name = data.service.title.empty() ? fs::path(a.restbench[0]).stem().string() : data.service.title;
        for (auto& q : data.queries) q.domain = d.name;
        d.services.push_back(std::move(data.service));
        d.queries = std::move(data.queries);
        domains.push_back(std::move(d));
    } else if (!g.benchmark.empty()) {
        domains = load_instance(g.benchmark).domains;
    } else {
        throw UsageError("bench run needs --benchmark or --restbench");
    }

    GridConfig grid = cfg.effective_grid();
    if (!g.ks.empty()) grid.ks = g.ks;
    if (g.strategy) grid.strategies = {cfg.strategy};
    if (!a.agent_ks.empty()) {
        grid.agent_ks.clear();
        for (const auto& k : a.agent_ks) grid.agent_ks.push_back(parse_search_k(k));
    }
    try {
        grid.validate();
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }
    cfg.grid = grid;
    const auto fingerprint = emit_config_fingerprint(cfg);

    std::unique_ptr<ChatProvider> llm;
    const bool needs_llm = !grid.agent_ks.empty() ||
                           std::any_of(grid.strategies.begin(), grid.strategies.end(),
                                       [](const ChunkingStrategy& s) { return s.uses_llm(); });
    if (needs_llm) llm = make_chat_provider(cfg.llm);

    auto report = run_grid(domains, grid, llm.get(), fingerprint);
    report.config = cfg.to_json();
    const fs::path dir(g.out);
    write_file(dir / "rows.csv", report.rows_csv());
    write_file(dir / "summary.json", canonical_serialize(report.summary()));
    write_file(dir / "report.txt", render_report_text(report));
    out << fmt::format("{} candidates, {} rows, {} failures -> {}\nfingerprint {}\n", report.candidates.size(),
                       report.rows.size(), report.failures.size(), dir.string(), fingerprint);
    return kExitOk;
}

int cmd_report(const Globals& g, const ReportArgs& a, std::ostream& out) {
    if (a.in.empty() == a.rows.empty()) throw UsageError("report needs exactly one of --in and --rows");
    const fs::path rows_path = a.rows.empty() ? fs::path(a.in) / "rows.csv" : fs::path(a.rows);
    GridReport report;
    {
        std::ifstream in(rows_path, std::ios::binary);
        if (!in) throw LoadError(rows_path.string(), "cannot open file");
        try {
            report.rows = read_rows_csv(in, &report.fingerprint);
        } catch (const LoadError& e) {
            throw LoadError(rows_path.string() + ":" + e.location(), std::string(e.what()).substr(e.location().size() + 2));
        }
    }
    Json summary;
    if (!a.in.empty() && fs::exists(fs::path(a.in) / "summary.json")) {
        try {
            summary = Json::parse(read_file(fs::path(a.in) / "summary.json"));
        } catch (const nlohmann::json::parse_error& e) {
            throw LoadError((fs::path(a.in) / "summary.json").string(), e.what());
        }
    }
    if (summary.contains("domains")) {
        report.domains = summary["domains"].get<std::vector<std::string>>();
    }
    for (const auto& r : report.rows) {
        if (std::find(report.domains.begin(), report.domains.end(), r.domain) == report.domains.end()) {
            report.domains.push_back(r.domain);
        }
        if (std::find(report.candidates.begin(), report.candidates.end(), r.candidate) == report.candidates.end()) {
            report.candidates.push_back(r.candidate);
        }
    }
    if (summary.contains("config")) report.config = summary["config"];
    if (summary.contains("tokens")) {
        for (const auto& t : summary["tokens"]) {
            report.tokens.push_back({t.at("strategy").get<std::string>(), t.at("mean_tokens").get<double>(),
                                     t.at("chunks").get<std::size_t>()});
        }
    }
    if (summary.contains("agent_usage")) {
        for (const auto& u : summary["agent_usage"]) {
            const auto id = u.at("candidate").get<std::string>();
            auto c = std::find_if(report.candidates.begin(), report.candidates.end(),
                                  [&](const GridCandidate& x) { return x.id() == id; });
            if (c == report.candidates.end()) continue;
            AgentUsage usage{*c, {}, u.at("sessions").get<std::size_t>(), u.at("model_calls").get<std::size_t>()};
            usage.usage.prompt = u.at("prompt_tokens").get<std::uint64_t>();
            usage.usage.completion = u.at("completion_tokens").get<std::uint64_t>();
            report.agent_usage.push_back(usage);
        }
    }
    summarize_rows(report);
    const auto text = a.format == "json" ? canonical_serialize(report.summary()) : render_report_text(report);
    if (g.out.empty()) {
        out << text;
    } else {
        write_file(g.out, text);
        out << "report -> " << g.out << "\n";
    }
    return kExitOk;
}

int cmd_tokens(const TokensArgs& a, std::ostream& out) {
    const auto tok = default_tokenizer();
    for (const auto& f : a.files) out << tok->count(read_file(f)) << "\t" << f << "\n";
    return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Service discovery over OpenAPI documents: chunking, retrieval, agent, benchmarks.", "svcdisc"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_flag("--mock-providers", g.mock, "Deterministic local embeddings and the offline mock chat provider");
    app.add_option("--jobs", g.jobs, "Parallel workers")->check(CLI::PositiveNumber);
    app.add_option("--strategy", g.strategy, "Chunking strategy name");
    app.add_option("--model", g.model, "Embedding model");
    app.add_option("--k", g.ks, "Results per query (repeatable for bench run)")->check(CLI::PositiveNumber);
    app.add_option("--chunk-size", g.chunk_size, "Token window size s")->check(CLI::PositiveNumber);
    app.add_option("--overlap", g.overlap, "Token window overlap l");
    app.add_option("--out", g.out, "Output file or directory");
    app.add_option("--benchmark", g.benchmark, "Benchmark instance file");
    app.add_flag("-v,--verbose", g.verbose, "Log progress");

    IndexArgs index_args;
    auto* index = app.add_subcommand("index", "Chunk and embed OpenAPI documents into a snapshot");
    index->add_option("docs", index_args.docs, "OpenAPI JSON files")->required()->check(CLI::ExistingFile);
    index->add_option("--chunks", index_args.chunks, "Also write the chunks as JSONL");

    QueryArgs query_args;
    auto* query = app.add_subcommand("query", "Retrieve endpoints for a query from a snapshot");
    query->add_option("text", query_args.text, "Query text")->required();
    query->add_option("--index", query_args.index, "Snapshot file")->required()->check(CLI::ExistingFile);
    query->add_flag("--json", query_args.json, "Print chunks and scores as JSON");

    AgentArgs agent_args;
    auto* agent = app.add_subcommand("agent", "Run one discovery-agent session");
    agent->add_option("text", agent_args.text, "Query text")->required();
    agent->add_option("--docs", agent_args.docs, "OpenAPI JSON files")->check(CLI::ExistingFile);
    agent->add_option("--domain", agent_args.domain, "Domain of --benchmark to search");
    agent->add_option("--search-k", agent_args.search_k, "Results per search call, or \"all\"");
    agent->add_option("--max-iterations", agent_args.max_iterations)->check(CLI::PositiveNumber);
    agent->add_option("--trace", agent_args.trace, "Write the session trace as JSON");

    auto* bench = app.add_subcommand("bench", "Benchmark generation, validation and evaluation");
    bench->require_subcommand(1);
    bench->fallthrough();

    GenerateArgs gen_args;
    auto* generate = bench->add_subcommand("generate", "Generate benchmark instances");
    generate->add_option("--instances", gen_args.instances)->check(CLI::PositiveNumber);
    generate->add_option("--instance", gen_args.instance, "Generate only this instance");
    generate->add_option("--checkpoint", gen_args.checkpoint, "Checkpoint directory for resuming");
    generate->add_option("--domains", gen_args.domains, "Domains to generate");
    generate->add_option("--seed", gen_args.seed);

    ValidateArgs val_args;
    auto* validate = bench->add_subcommand("validate", "Check a benchmark instance");
    validate->add_flag("--no-shape", val_args.no_shape, "Skip the count checks");
    validate->add_flag("--no-similarity", val_args.no_similarity, "Skip the query similarity check");

    RunArgs run_args;
    auto* run = bench->add_subcommand("run", "Evaluate the candidate grid on a benchmark");
    run->add_option("--restbench", run_args.restbench, "OpenAPI file and query file")->expected(2);
    run->add_option("--agent-k", run_args.agent_ks, "Add agent candidates (a positive integer or \"all\")");

    ReportArgs report_args;
    auto* report = app.add_subcommand("report", "Recompute and print a report from grid rows");
    report->add_option("--in", report_args.in, "Directory written by bench run");
    report->add_option("--rows", report_args.rows, "Rows CSV file");
    report->add_option("--format", report_args.format)->check(CLI::IsMember({"text", "json"}));

    TokensArgs tokens_args;
    auto* tokens = app.add_subcommand("tokens", "Count tokens of each file with the built-in tokenizer");
    tokens->add_option("files", tokens_args.files, "Text files")->required()->check(CLI::ExistingFile);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n\n";
        const CLI::App* shown = &app;
        for (const CLI::App* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front(); sub;
             sub = sub->get_subcommands().empty() ? nullptr : sub->get_subcommands().front()) {
            shown = sub;
        }
        err << shown->help();
        return kExitUsage;
    }

    spdlog::set_level(g.verbose ? spdlog::level::info : spdlog::level::warn);
    try {
        if (*index) return cmd_index(g, index_args, out);
        if (*query) return cmd_query(g, query_args, out);
        if (*agent) return cmd_agent(g, agent_args, out, err);
        if (*generate) return cmd_generate(g, gen_args, out);
        if (*validate) return cmd_validate(g, val_args, out, err);
        if (*run) return cmd_run(g, run_args, out);
        if (*report) return cmd_report(g, report_args, out);
        if (*tokens) return cmd_tokens(tokens_args, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const LoadError& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomainError;
    } catch (const ResumableError& e) {
        err << "error: " << e.what() << "\nrerun with the same --checkpoint to resume\n";
        return kExitDomainError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomainError;
    }
    return kExitUsage;
}

}  // namespace svcdisc::cli
