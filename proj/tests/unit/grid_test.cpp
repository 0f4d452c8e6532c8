// SPDX-License-Identifier: Apache-2.0
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "svcdisc/error.hpp"
#include "svcdisc/grid.hpp"
#include "test_support.hpp"

using namespace svcdisc;
using namespace svcdisc::testing;

namespace {

const BenchmarkInstance& small_instance() {
    static const BenchmarkInstance instance = mock_instance({"Energy", "Financials", "Utilities"}, 1);
    return instance;
}

GridConfig small_grid(std::size_t jobs) {
    GridConfig g;
    ProviderConfig a, b;
    b.model = "hash-alt";
    b.dimension = 96;
    g.models = {a, b};
    g.ks = {5, 10};
    g.strategies = {ChunkingStrategy::from_name("endpoint-split", 8191, 0),
                    ChunkingStrategy::from_name("no-split", 100, 20), ChunkingStrategy::from_name("summary"),
                    ChunkingStrategy::from_name("craft")};
    g.agent_ks = {5};
    g.jobs = jobs;
    return g;
}

}  // namespace

TEST(GridConfigTest, ValidationAndJson) {
    GridConfig g = small_grid(1);
    EXPECT_NO_THROW(g.validate());
    const auto back = GridConfig::from_json(g.to_json());
    EXPECT_EQ(back.to_json(), g.to_json());
    EXPECT_FALSE(g.to_json().contains("jobs"));
    g.ks = {};
    EXPECT_NO_THROW(g.validate());  // agent candidates alone are enough
    g.agent_ks.clear();
    EXPECT_THROW(g.validate(), ConfigError);
    g = small_grid(1);
    g.ks = {0};
    EXPECT_THROW(g.validate(), ConfigError);
    g = small_grid(1);
    g.strategies.push_back(g.strategies.front());
    EXPECT_THROW(g.validate(), ConfigError);
    g = small_grid(1);
    g.models.clear();
    EXPECT_THROW(g.validate(), ConfigError);
    EXPECT_THROW(GridConfig::from_json(Json{{"agent_ks", {"some"}}}), ConfigError);
}

TEST(GridTest, RowsPerQueryEqualCandidateCount) {
    MockChatProvider llm;
    const auto& inst = small_instance();
    const auto report = run_grid(inst.domains, small_grid(4), &llm, "fp");
    EXPECT_TRUE(report.failures.empty());
    const std::size_t per_query = 2 * 2 * 4 + 2;  // |M||K||S| plus one agent candidate per model
    EXPECT_EQ(report.candidates.size(), per_query);
    std::map<std::pair<std::string, std::size_t>, std::size_t> counts;
    for (const auto& r : report.rows) ++counts[{r.domain, r.query}];
    EXPECT_EQ(counts.size(), inst.query_count());
    for (const auto& [_, n] : counts) EXPECT_EQ(n, per_query);
    EXPECT_EQ(report.aggregates.size(), per_query);
    EXPECT_TRUE(report.stability.has_value());
    // two models x two k x (three domains + All)
    EXPECT_EQ(report.friedman.size(), 2u * 2u * 4u);
    EXPECT_EQ(report.tokens.size(), 4u);
    EXPECT_EQ(report.agent_usage.size(), 2u);
}

TEST(GridTest, OutputIndependentOfJobs) {
    MockChatProvider llm;
    const auto& inst = small_instance();
    const auto serial = run_grid(inst.domains, small_grid(1), &llm, "fp");
    const auto parallel = run_grid(inst.domains, small_grid(6), &llm, "fp");
    EXPECT_EQ(serial.rows_csv(), parallel.rows_csv());
    EXPECT_EQ(canonical_serialize(serial.summary()), canonical_serialize(parallel.summary()));
    EXPECT_EQ(render_report_text(serial), render_report_text(parallel));
}

TEST(GridTest, RecallIsMonotoneInK) {
    MockChatProvider llm;
    const auto& inst = small_instance();
    auto g = small_grid(4);
    g.agent_ks.clear();
    g.strategies = {ChunkingStrategy::from_name("relevant-fields")};
    const auto report = run_grid(inst.domains, g, &llm, "fp");
    std::map<std::tuple<std::string, std::string, std::size_t>, std::map<std::size_t, double>> by_k;
    for (const auto& r : report.rows) by_k[{r.candidate.model, r.domain, r.query}][r.candidate.k] = r.recall;
    for (const auto& [_, ks] : by_k) EXPECT_LE(ks.at(5), ks.at(10));
}

TEST(GridTest, LlmStrategiesWithoutProviderFailCleanly) {
    const auto& inst = small_instance();
    auto g = small_grid(2);
    g.agent_ks.clear();
    const auto report = run_grid(inst.domains, g, nullptr, "fp");
    EXPECT_FALSE(report.failures.empty());
    for (const auto& r : report.rows) EXPECT_FALSE(ChunkingStrategy::from_name("summary").label() == r.candidate.strategy);
    for (const auto& c : report.candidates) {
        EXPECT_TRUE(c.strategy.find("summary") == std::string::npos && c.strategy.find("craft") == std::string::npos);
    }
}

TEST(GridTest, CsvRoundTripAndReportRebuild) {
    MockChatProvider llm;
    const auto& inst = small_instance();
    const auto report = run_grid(inst.domains, small_grid(4), &llm, "fingerprint-123");
    std::istringstream in(report.rows_csv());
    std::string fp;
    GridReport rebuilt;
    rebuilt.rows = read_rows_csv(in, &fp);
    EXPECT_EQ(fp, "fingerprint-123");
    ASSERT_EQ(rebuilt.rows.size(), report.rows.size());
    for (std::size_t i = 0; i < rebuilt.rows.size(); ++i) {
        EXPECT_EQ(rebuilt.rows[i].candidate, report.rows[i].candidate);
        EXPECT_EQ(rebuilt.rows[i].recall, report.rows[i].recall);
        EXPECT_EQ(rebuilt.rows[i].precision, report.rows[i].precision);
    }
    rebuilt.fingerprint = fp;
    rebuilt.domains = report.domains;
    rebuilt.candidates = report.candidates;
    rebuilt.tokens = report.tokens;
    rebuilt.agent_usage = report.agent_usage;
    summarize_rows(rebuilt);
    EXPECT_EQ(rebuilt.summary()["aggregates"], report.summary()["aggregates"]);
    EXPECT_EQ(rebuilt.summary()["friedman"], report.summary()["friedman"]);
}

TEST(GridTest, BadCsvReportsLine) {
    std::istringstream in("# fingerprint: x\ncandidate,model,strategy,k,domain,query,recall,precision,retrieved\n"
                          "a,m,s,5,D,0,1,1,5\na,m,s,five,D,1,1,1,5\n");
    try {
        read_rows_csv(in);
        FAIL();
    } catch (const LoadError& e) {
        EXPECT_EQ(e.location(), "line 4");
    }
}

TEST(GridTest, ReportTextMarksInsignificantTests) {
    GridReport report;
    report.domains = {"A", "B"};
    for (const char* s : {"s1", "s2"}) {
        for (const char* d : {"A", "B"}) {
            for (std::size_t q = 0; q < 3; ++q) report.rows.push_back({{"m", 5, s}, d, q, 0.5, 0.5, 5});
        }
    }
    summarize_rows(report);
    const auto text = render_report_text(report);
    EXPECT_NE(text.find('*'), std::string::npos);
    EXPECT_TRUE(report.summary()["friedman"][0]["not_significant"].get<bool>());
}

TEST(StandardStrategiesTest, FourteenSettings) {
    std::vector<std::string> labels;
    for (const auto& s : standard_strategies()) labels.push_back(s.label());
    EXPECT_EQ(labels, (std::vector<std::string>{
                          "no-split/token(100,0)", "no-split/token(100,20)", "no-split/token(200,0)",
                          "no-split/token(200,20)", "json-split/token(100,0)", "json-split/token(100,20)",
                          "endpoint-split/token(8191,0)", "endpoint-split/token(8191,20)",
                          "endpoint-split/remove-examples", "endpoint-split/relevant-fields",
                          "endpoint-split/json-token(8191,0)", "endpoint-split/summary", "endpoint-split/query",
                          "endpoint-split/craft"}));
}
