// SPDX-License-Identifier: Apache-2.0
#include "oracles.hpp"

#include <algorithm>
#include <numeric>

namespace svcdisc::testing {

std::vector<OracleHit> brute_force_top_k(const std::vector<std::vector<float>>& vectors,
                                         const std::vector<float>& query, std::size_t k) {
    std::vector<OracleHit> all;
    all.reserve(vectors.size());
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        double s = 0.0;
        for (std::size_t d = 0; d < query.size(); ++d) {
            s += static_cast<double>(vectors[i][d]) * static_cast<double>(query[d]);
        }
        all.push_back({static_cast<std::uint32_t>(i), s});
    }
    std::sort(all.begin(), all.end(), [](const OracleHit& a, const OracleHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    all.resize(std::min(k, all.size()));
    return all;
}

double conover_friedman(const std::vector<std::vector<double>>& table) {
    const double n = static_cast<double>(table.size());
    const std::size_t kk = table.front().size();
    const double k = static_cast<double>(kk);
    std::vector<double> rank_sums(kk, 0.0);
    double a = 0.0;
    for (const auto& row : table) {
        // rank of x = (number below) + (number equal + 1) / 2
        for (std::size_t j = 0; j < kk; ++j) {
            double below = 0.0, equal = 0.0;
            for (double v : row) {
                if (v < row[j]) below += 1.0;
                if (v == row[j]) equal += 1.0;
            }
            const double r = below + (equal + 1.0) / 2.0;
            rank_sums[j] += r;
            a += r * r;
        }
    }
    const double c = n * k * (k + 1.0) * (k + 1.0) / 4.0;
    if (a - c == 0.0) return 0.0;
    double ss = 0.0;
    for (double r : rank_sums) ss += (r - n * (k + 1.0) / 2.0) * (r - n * (k + 1.0) / 2.0);
    return (k - 1.0) * ss / (a - c);
}

CraftSimulation simulate_craft(const std::array<std::vector<EndpointId>, 3>& ranked, std::size_t k) {
    CraftSimulation sim;
    std::array<std::vector<EndpointId>, 3> sets;
    std::array<std::size_t, 3> pos{0, 0, 0};
    auto in = [](const std::vector<EndpointId>& v, const EndpointId& e) {
        return std::find(v.begin(), v.end(), e) != v.end();
    };
    std::size_t view = 0;
    std::size_t idle = 0;  // consecutive views that had nothing left
    while (sim.accepted.size() < k) {
        while (pos[view] < ranked[view].size() && in(sets[view], ranked[view][pos[view]])) ++pos[view];
        if (pos[view] == ranked[view].size()) {
            if (++idle == 3) {
                sim.exhausted = true;
                break;
            }
            view = (view + 1) % 3;
            continue;
        }
        idle = 0;
        const EndpointId e = ranked[view][pos[view]++];
        sets[view].push_back(e);
        sim.steps.push_back({view, e});
        const int count = static_cast<int>(in(sets[0], e)) + static_cast<int>(in(sets[1], e)) +
                          static_cast<int>(in(sets[2], e));
        if (count >= 2 && !in(sim.accepted, e)) {
            sim.accepted.push_back(e);
            sim.accepted_at.push_back(sim.steps.size());
        }
        view = (view + 1) % 3;
    }
    return sim;
}

}  // namespace svcdisc::testing
