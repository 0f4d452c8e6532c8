// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <set>

#include <gtest/gtest.h>

#include "svcdisc/benchmark.hpp"
#include "svcdisc/error.hpp"
#include "test_support.hpp"

using namespace svcdisc;
using namespace svcdisc::testing;

namespace {

const std::vector<std::string> kTwoDomains = {"Energy", "Health Care"};

BenchmarkConfig small_config(std::uint64_t seed = 3) {
    BenchmarkConfig c;
    c.domains = kTwoDomains;
    c.instances = 1;
    c.seed = seed;
    c.parallelism = 2;
    return c;
}

// Answers every request with the same unusable text.
class Garbage final : public ChatProvider {
public:
    ChatResponse complete(const ChatRequest&) override {
        ++calls;
        ChatResponse r;
        r.message = {"assistant", "I am not sure what you mean.", {}, {}};
        return r;
    }
    std::string fingerprint() const override { return "garbage"; }
    std::atomic<int> calls{0};
};

}  // namespace

TEST(ExpectedSizeTest, RoundsAndClamps) {
    EXPECT_EQ(clamp_expected_size(4.4, 50), 4u);
    EXPECT_EQ(clamp_expected_size(4.5, 50), 5u);
    EXPECT_EQ(clamp_expected_size(-3.0, 50), 1u);
    EXPECT_EQ(clamp_expected_size(0.2, 50), 1u);
    EXPECT_EQ(clamp_expected_size(80.0, 50), 50u);
}

TEST(YesNoTest, FirstWordDecides) {
    EXPECT_EQ(parse_yes_no("Yes"), true);
    EXPECT_EQ(parse_yes_no("  no, it is not needed"), false);
    EXPECT_EQ(parse_yes_no("YES."), true);
    EXPECT_EQ(parse_yes_no("maybe"), std::nullopt);
    EXPECT_EQ(parse_yes_no(""), std::nullopt);
}

TEST(DomainSlugTest, LowercaseWithDashes) {
    EXPECT_EQ(domain_slug("Consumer Discretionary"), "consumer-discretionary");
    EXPECT_EQ(domain_slug("Health Care"), "health-care");
}

TEST(BenchmarkConfigTest, ValidationAndJson) {
    BenchmarkConfig c;
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.domains.size(), 11u);
    const auto back = BenchmarkConfig::from_json(c.to_json());
    EXPECT_EQ(back.to_json(), c.to_json());
    c.n_q = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.s_threshold = 1.5;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.domains.clear();
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(GeneratorTest, MockInstancePassesEveryInvariant) {
    const auto config = small_config();
    const auto instance = mock_instance(config.domains, config.seed);
    DeterministicLocalProvider embedder(ProviderConfig{});
    const auto issues = validate_instance(instance, InstanceShape::from(config), &embedder, config.s_threshold);
    for (const auto& i : issues) ADD_FAILURE() << i.location << ": " << i.message;
    ASSERT_EQ(instance.domains.size(), 2u);
    for (const auto& d : instance.domains) {
        std::set<EndpointId> ids;
        for (const auto& s : d.services) {
            EXPECT_EQ(s.endpoints.size(), 10u);
            for (const auto& e : s.endpoints) EXPECT_TRUE(ids.insert(e.id()).second) << e.id().str();
        }
        EXPECT_EQ(d.queries.size(), 10u);
        EXPECT_LT(max_pairwise_similarity(d.queries, embedder), 0.8);
    }
}

TEST(GeneratorTest, SameSeedSameInstanceRegardlessOfParallelism) {
    const auto a = mock_instance(kTwoDomains, 5, 1);
    const auto b = mock_instance(kTwoDomains, 5, 4);
    EXPECT_EQ(canonical_serialize(a.to_json()), canonical_serialize(b.to_json()));
    const auto c = mock_instance(kTwoDomains, 6, 1);
    EXPECT_NE(canonical_serialize(a.to_json()), canonical_serialize(c.to_json()));
}

TEST(GeneratorTest, InterruptedRunResumesToIdenticalInstance) {
    const auto config = small_config(9);
    MockChatProvider mock(config.seed);
    DeterministicLocalProvider embedder(ProviderConfig{});
    FailingAfter counting(mock, static_cast<std::size_t>(-1));
    const auto reference = BenchmarkGenerator(config, counting, embedder).create_benchmark(0);

    for (std::size_t fraction : {4, 2}) {
        TempDir dir;
        FailingAfter interrupted(mock, counting.calls() / fraction);
        try {
            BenchmarkGenerator(config, interrupted, embedder).create_benchmark(0, dir.path());
            FAIL() << "no interruption";
        } catch (const ResumableError& e) {
            EXPECT_EQ(e.checkpoint(), dir.path().string());
        }
        FailingAfter resumed_llm(mock, static_cast<std::size_t>(-1));
        const auto resumed = BenchmarkGenerator(config, resumed_llm, embedder).create_benchmark(0, dir.path());
        EXPECT_LT(resumed_llm.calls(), counting.calls());
        EXPECT_EQ(canonical_serialize(resumed.to_json()), canonical_serialize(reference.to_json()));

        // a completed checkpoint replays without any model call
        FailingAfter replay(mock, 0);
        const auto again = BenchmarkGenerator(config, replay, embedder).create_benchmark(0, dir.path());
        EXPECT_EQ(canonical_serialize(again.to_json()), canonical_serialize(reference.to_json()));
    }
}

TEST(GeneratorTest, CheckpointFromAnotherConfigIsRejected) {
    TempDir dir;
    auto config = small_config(1);
    config.domains = {"Energy"};
    MockChatProvider mock(1);
    DeterministicLocalProvider embedder(ProviderConfig{});
    BenchmarkGenerator(config, mock, embedder).create_benchmark(0, dir.path());
    config.n_q = 4;
    EXPECT_THROW(BenchmarkGenerator(config, mock, embedder).create_benchmark(0, dir.path()), Error);
}

TEST(GeneratorTest, UnusableAnswersExhaustTheBudget) {
    auto config = small_config();
    config.budgets.regenerations = 2;
    Garbage llm;
    DeterministicLocalProvider embedder(ProviderConfig{});
    BenchmarkGenerator gen(config, llm, embedder);
    EXPECT_THROW(gen.create_services("Energy"), GenerationError);
    EXPECT_EQ(llm.calls.load(), 3);
}

TEST(GeneratorTest, FingerprintCoversConfigAndProviders) {
    MockChatProvider a(1), b(2);
    DeterministicLocalProvider embedder(ProviderConfig{});
    const auto config = small_config();
    EXPECT_NE(BenchmarkGenerator(config, a, embedder).fingerprint(), BenchmarkGenerator(config, b, embedder).fingerprint());
    auto other = config;
    other.n_e = 8;
    EXPECT_NE(BenchmarkGenerator(config, a, embedder).fingerprint(), BenchmarkGenerator(other, a, embedder).fingerprint());
}

TEST(InstanceIoTest, SaveLoadRoundTrip) {
    const auto instance = mock_instance({"Utilities"}, 2);
    TempDir dir;
    save_instance(dir / "i.json", instance);
    BenchmarkConfig c;
    c.domains = {"Utilities"};
    const auto back = load_instance(dir / "i.json", InstanceShape::from(c));
    EXPECT_EQ(canonical_serialize(back.to_json()), canonical_serialize(instance.to_json()));
    EXPECT_EQ(back.query_count(), 10u);
    EXPECT_EQ(&back.domain("Utilities"), &back.domains[0]);
    EXPECT_THROW(back.domain("Energy"), NotFoundError);
}

TEST(InstanceIoTest, SchemaViolationsCarryLocations) {
    const auto j = mock_instance({"Utilities"}, 2).to_json();
    auto expect_location = [](const Json& doc, const std::string& prefix, const InstanceShape& shape = {}) {
        try {
            instance_from_json(doc, shape);
            ADD_FAILURE() << "accepted: " << prefix;
        } catch (const LoadError& e) {
            EXPECT_EQ(e.location().rfind(prefix, 0), 0u) << e.what();
        }
    };
    auto unknown = j;
    unknown["domains"][0]["queries"][3]["expected"][0] = "GET /nowhere";
    expect_location(unknown, "$.domains[0].queries[3].expected[0]");
    auto empty = j;
    empty["domains"][0]["queries"][1]["expected"] = Json::array();
    expect_location(empty, "$.domains[0].queries[1].expected");
    auto missing = j;
    missing.erase("instance");
    expect_location(missing, "$.instance");
    InstanceShape shape;
    shape.queries_per_domain = 9;
    expect_location(j, "$.domains[0]", shape);
}

TEST(InstanceIoTest, MalformedFileIsLoadError) {
    TempDir dir;
    write_file(dir / "bad.json", "{\"instance\": ");
    EXPECT_THROW(load_instance(dir / "bad.json"), LoadError);
    EXPECT_THROW(load_instance(dir / "absent.json"), LoadError);
}

TEST(ValidateInstanceTest, ReportsViolations) {
    auto instance = mock_instance({"Utilities"}, 2);
    instance.domains[0].queries[0].expected = {EndpointId::parse("GET /nowhere")};
    instance.domains[0].queries[1].expected.clear();
    instance.domains[0].queries[2].query = instance.domains[0].queries[3].query;
    DeterministicLocalProvider embedder(ProviderConfig{});
    InstanceShape shape;
    shape.services_per_domain = 6;
    const auto issues = validate_instance(instance, shape, &embedder, 0.8);
    EXPECT_GE(issues.size(), 4u);
}

TEST(RestBenchTest, LoadsQueriesAndWarnsOnPathOnlyGold) {
    const auto data = load_restbench(data_path("petstore.json"), data_path("petstore_queries.json"));
    EXPECT_EQ(data.service.title, "Pet Store");
    ASSERT_EQ(data.queries.size(), 3u);
    EXPECT_EQ(data.queries[0].expected,
              (std::vector<EndpointId>{EndpointId::parse("POST /pets"), EndpointId::parse("GET /pets")}));
    EXPECT_EQ(data.queries[2].expected, std::vector<EndpointId>{EndpointId::parse("GET /owners/{ownerId}/pets")});
    ASSERT_EQ(data.warnings.size(), 1u);
}

TEST(RestBenchTest, UnknownGoldEndpointIsLoadError) {
    TempDir dir;
    write_file(dir / "q.json", R"([{"query": "x", "solution": ["PUT /pets"]}])");
    EXPECT_THROW(load_restbench(data_path("petstore.json"), dir / "q.json"), LoadError);
}
