// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "svcdisc/chat.hpp"
#include "svcdisc/error.hpp"
#include "svcdisc/retrieval.hpp"
#include "test_support.hpp"

using namespace svcdisc;
using svcdisc::testing::make_service;
using svcdisc::testing::simulate_craft;

namespace {

EndpointId ep(int i) { return EndpointId::make("GET", fmt::format("/e{}", i)); }

std::vector<ServiceDocument> corpus() {
    return {make_service("Orders", "Order handling.",
                         {{"GET", "/orders", "List orders placed by customers."},
                          {"POST", "/orders", "Place a new order for a customer."},
                          {"DELETE", "/orders/{id}", "Cancel an order."}}),
            make_service("Billing", "Invoices.",
                         {{"GET", "/invoices", "List invoices for an account."},
                          {"POST", "/invoices/{id}/pay", "Pay an outstanding invoice."}})};
}

FlatIndex ranked_view(const std::vector<EndpointId>& ranking) {
    FlatIndex index(2);
    for (std::size_t r = 0; r < ranking.size(); ++r) {
        const double angle = 0.01 + 0.02 * static_cast<double>(r);
        Chunk c;
        c.content = c.embedding_input = ranking[r].str();
        c.endpoint_refs = {ranking[r]};
        index.insert(normalized({std::cos(angle), std::sin(angle)}), std::move(c));
    }
    index.seal();
    return index;
}

}  // namespace

TEST(ChunkCorpusTest, ConcatenatesViewsInDocumentOrder) {
    const auto docs = corpus();
    const auto views = chunk_corpus(docs, ChunkingStrategy::from_name("remove-examples"));
    ASSERT_EQ(views.size(), 1u);
    ASSERT_EQ(views[0].chunks.size(), 5u);
    EXPECT_EQ(views[0].chunks[0].source_service, "Orders");
    EXPECT_EQ(views[0].chunks[4].source_service, "Billing");
}

TEST(RetrieveTest, DeduplicatesEndpointsInRankOrder) {
    const auto docs = corpus();
    DeterministicLocalProvider embedder(ProviderConfig{});
    const auto strategy = ChunkingStrategy::from_name("endpoint-split", 6, 2);
    const auto snap = build_index(docs, strategy, embedder);
    const auto& index = snap.view("main");
    EXPECT_GT(index.size(), 5u);
    const auto result = retrieve("place an order for a customer", index.size(), index, embedder);
    EXPECT_EQ(result.chunks.size(), index.size());
    EXPECT_EQ(result.endpoints.size(), 5u);
    EXPECT_TRUE(std::is_sorted(result.scores.begin(), result.scores.end(), std::greater<>()));
    std::vector<EndpointId> firsts;
    for (const auto& c : result.chunks) {
        if (std::find(firsts.begin(), firsts.end(), c.endpoint_refs[0]) == firsts.end()) {
            firsts.push_back(c.endpoint_refs[0]);
        }
    }
    EXPECT_EQ(result.endpoints, firsts);
    EXPECT_EQ(result.endpoints.front(), EndpointId::parse("POST /orders"));
}

TEST(RetrieveTest, ProviderMismatchIsContractError) {
    const auto docs = corpus();
    DeterministicLocalProvider a(ProviderConfig{});
    ProviderConfig other;
    other.model = "other";
    DeterministicLocalProvider b(other);
    const auto snap = build_index(docs, ChunkingStrategy::from_name("relevant-fields"), a);
    EXPECT_THROW(retrieve("orders", 3, snap.view("main"), b), ContractError);
    EXPECT_EQ(snap.view("main").strategy_fingerprint(), ChunkingStrategy::from_name("relevant-fields").fingerprint());
}

TEST(RetrieveTest, ResultJsonCarriesCandidate) {
    const auto docs = corpus();
    DeterministicLocalProvider embedder(ProviderConfig{});
    const auto snap = build_index(docs, ChunkingStrategy::from_name("relevant-fields"), embedder);
    const auto j = retrieve("pay invoice", 2, snap.view("main"), embedder).to_json("pay invoice", "cand");
    EXPECT_EQ(j["query"], "pay invoice");
    EXPECT_EQ(j["candidate"], "cand");
    EXPECT_EQ(j["chunks"].size(), 2u);
    EXPECT_EQ(j["endpoints"][0], "POST /invoices/{id}/pay");
}

TEST(CraftMergeTest, WorkedExampleIdenticalViews) {
    const std::vector<EndpointId> same = {ep(1), ep(2), ep(3)};
    const auto m = craft_merge({same, same, same}, 2);
    EXPECT_EQ(m.accepted, (std::vector<EndpointId>{ep(1), ep(2)}));
    EXPECT_EQ(m.accepted_at, (std::vector<std::size_t>{2, 5}));
    EXPECT_FALSE(m.exhausted);
}

TEST(CraftMergeTest, DisjointViewsExhaustWithoutAcceptance) {
    const auto m = craft_merge({std::vector<EndpointId>{ep(1)}, {ep(2)}, {ep(3)}}, 1);
    EXPECT_TRUE(m.accepted.empty());
    EXPECT_TRUE(m.exhausted);
}

TEST(CraftMergeTest, PartialResultIsNotPadded) {
    const auto m = craft_merge({std::vector<EndpointId>{ep(1), ep(2)}, {ep(1), ep(3)}, {ep(4)}}, 3);
    EXPECT_EQ(m.accepted, std::vector<EndpointId>{ep(1)});
    EXPECT_TRUE(m.exhausted);
}

TEST(CraftMergeTest, ZeroKThrows) {
    EXPECT_THROW(craft_merge({}, 0), ConfigError);
}

// Property: on random rankings the merge equals the step-by-step simulation,
// never returns more than k, and every accepted endpoint is ranked by two views.
TEST(CraftMergeTest, MatchesSimulationOnRandomViews) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 400; ++trial) {
        std::array<std::vector<EndpointId>, 3> views;
        const int universe = std::uniform_int_distribution<int>(1, 12)(rng);
        for (auto& v : views) {
            std::vector<int> ids(static_cast<std::size_t>(universe));
            std::iota(ids.begin(), ids.end(), 0);
            std::shuffle(ids.begin(), ids.end(), rng);
            ids.resize(std::uniform_int_distribution<std::size_t>(0, ids.size())(rng));
            for (int i : ids) v.push_back(ep(i));
        }
        const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 14)(rng);
        const auto m = craft_merge(views, k);
        const auto sim = simulate_craft(views, k);
        ASSERT_EQ(m.accepted, sim.accepted) << "trial " << trial;
        EXPECT_EQ(m.accepted_at, sim.accepted_at);
        EXPECT_EQ(m.exhausted, sim.exhausted);
        EXPECT_LE(m.accepted.size(), k);
        for (const auto& e : m.accepted) {
            int in = 0;
            for (const auto& v : views) in += std::find(v.begin(), v.end(), e) != v.end() ? 1 : 0;
            EXPECT_GE(in, 2);
        }
    }
}

TEST(CraftRetrieveTest, UsesViewRankingsAndReturnsAcceptedChunks) {
    const std::vector<EndpointId> a = {ep(1), ep(2), ep(3), ep(4)};
    const std::vector<EndpointId> b = {ep(4), ep(3), ep(2), ep(1)};
    const std::vector<EndpointId> c = {ep(2), ep(4), ep(1), ep(3)};
    const auto va = ranked_view(a), vb = ranked_view(b), vc = ranked_view(c);
    const EmbeddingVector q{{1.0f, 0.0f}};
    EXPECT_EQ(ranked_endpoints(va, q), a);
    for (std::size_t k = 1; k <= 5; ++k) {
        const auto r = craft_retrieve(q, k, {&va, &vb, &vc});
        EXPECT_EQ(r.endpoints, simulate_craft({a, b, c}, k).accepted);
        ASSERT_EQ(r.chunks.size(), r.endpoints.size());
        for (std::size_t i = 0; i < r.chunks.size(); ++i) EXPECT_EQ(r.chunks[i].endpoint_refs[0], r.endpoints[i]);
    }
}

TEST(CraftRetrieveTest, SnapshotViewsAndProviderCheck) {
    const auto docs = corpus();
    MockChatProvider llm;
    DeterministicLocalProvider embedder(ProviderConfig{});
    const auto snap = build_index(docs, ChunkingStrategy::from_name("craft"), embedder, &llm);
    EXPECT_TRUE(snap.has_view("summary") && snap.has_view("name") && snap.has_view("description"));
    const auto r = craft_retrieve("cancel an order", 2, snap, embedder);
    EXPECT_LE(r.endpoints.size(), 2u);
    EXPECT_FALSE(r.endpoints.empty());
    ProviderConfig other;
    other.dimension = 32;
    DeterministicLocalProvider wrong(other);
    EXPECT_THROW(craft_retrieve("cancel", 2, snap, wrong), ContractError);
}
