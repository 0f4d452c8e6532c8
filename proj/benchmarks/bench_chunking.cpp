// SPDX-License-Identifier: Apache-2.0
#include <fmt/format.h>
#include <benchmark/benchmark.h>

#include "svcdisc/chunking.hpp"

namespace {

svcdisc::ServiceDocument make_doc(std::size_t endpoints) {
    svcdisc::Json paths = svcdisc::Json::object();
    for (std::size_t i = 0; i < endpoints; ++i) {
        paths[fmt::format("/items{}/{{id}}", i)]["get"] = {
            {"summary", fmt::format("Fetch item group {} by id.", i)},
            {"parameters", {{{"name", "id"}, {"in", "path"}, {"required", true}, {"schema", {{"type", "string"}}}}}},
            {"responses", {{"200", {{"description", "The item."}}}}}};
    }
    const svcdisc::Json doc = {{"openapi", "3.0.3"},
                               {"info", {{"title", "Items"}, {"version", "1"}, {"description", "Item store."}}},
                               {"paths", paths}};
    return svcdisc::service_from_json(doc);
}

void BM_Chunk(benchmark::State& state, const char* name, std::size_t s, std::size_t l) {
    const auto doc = make_doc(50);
    const auto strategy = svcdisc::ChunkingStrategy::from_name(name, s, l);
    for (auto _ : state) benchmark::DoNotOptimize(svcdisc::chunk_document(doc, strategy));
}

}  // namespace

BENCHMARK_CAPTURE(BM_Chunk, no_split_token, "no-split", 100, 20);
BENCHMARK_CAPTURE(BM_Chunk, json_split_token, "json-split", 100, 20);
BENCHMARK_CAPTURE(BM_Chunk, endpoint_split, "endpoint-split", 8191, 0);
BENCHMARK_CAPTURE(BM_Chunk, relevant_fields, "relevant-fields", 0, 0);
