// SPDX-License-Identifier: Apache-2.0
#include <string>

#include <benchmark/benchmark.h>

#include "svcdisc/tokenizer.hpp"

namespace {

std::string sample_text(std::size_t repeats) {
    std::string s;
    for (std::size_t i = 0; i < repeats; ++i) {
        s += "GET /customers/{customerId}/orders returns the orders placed by a customer, newest first.\n";
    }
    return s;
}

void BM_Encode(benchmark::State& state) {
    const auto text = sample_text(static_cast<std::size_t>(state.range(0)));
    const auto& tok = svcdisc::default_tokenizer();
    for (auto _ : state) benchmark::DoNotOptimize(tok->encode(text));
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}

void BM_WindowSplit(benchmark::State& state) {
    const auto tokens = svcdisc::encode(sample_text(200));
    for (auto _ : state) benchmark::DoNotOptimize(svcdisc::window_split(tokens, 100, 20));
}

}  // namespace

BENCHMARK(BM_Encode)->Arg(10)->Arg(1000);
BENCHMARK(BM_WindowSplit);
