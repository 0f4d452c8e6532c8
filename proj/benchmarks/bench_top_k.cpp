// SPDX-License-Identifier: Apache-2.0
#include <random>

#include <benchmark/benchmark.h>

#include "svcdisc/vector_index.hpp"

namespace {

svcdisc::EmbeddingVector random_unit(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> n;
    std::vector<double> v(dim);
    for (auto& x : v) x = n(rng);
    return svcdisc::normalized(v);
}

void BM_TopK(benchmark::State& state) {
    const auto size = static_cast<std::size_t>(state.range(0));
    const auto dim = static_cast<std::size_t>(state.range(1));
    std::mt19937_64 rng(1);
    svcdisc::FlatIndex index(dim);
    for (std::size_t i = 0; i < size; ++i) index.insert(random_unit(rng, dim), svcdisc::Chunk{});
    index.seal();
    const auto query = random_unit(rng, dim);
    for (auto _ : state) benchmark::DoNotOptimize(index.top_k(query, 10));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * size));
}

}  // namespace

BENCHMARK(BM_TopK)->Args({1000, 64})->Args({10000, 256})->Args({50000, 256});
