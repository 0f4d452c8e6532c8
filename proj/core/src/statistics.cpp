// SPDX-License-Identifier: Apache-2.0
#include "svcdisc/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include "svcdisc/error.hpp"

namespace svcdisc {

Json FriedmanResult::to_json() const {
    return Json{{"statistic", statistic}, {"df", df},         {"p_value", p_value},
                {"blocks", blocks},       {"treatments", treatments}, {"dropped_blocks", dropped_blocks}};
}

std::vector<double> midranks(const std::vector<double>& values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
        i = j + 1;
    }
    return ranks;
}

double chi_square_sf(double x, std::size_t df) {
    if (df == 0) throw ConfigError("chi-square needs at least one degree of freedom");
    if (!(x > 0.0)) return 1.0;
    return boost::math::gamma_q(static_cast<double>(df) / 2.0, x / 2.0);
}

FriedmanResult friedman(const std::vector<std::vector<double>>& table) {
    if (table.empty()) throw ConfigError("Friedman test needs at least 2 blocks, got 0");
    const std::size_t k = table.front().size();
    if (k < 2) throw ConfigError(fmt::format("Friedman test needs at least 2 treatments, got {}", k));

    FriedmanResult result;
    result.treatments = k;
    result.df = k - 1;
    std::vector<double> rank_sums(k, 0.0);
    double tie_sum = 0.0;
    for (std::size_t b = 0; b < table.size(); ++b) {
        const auto& row = table[b];
        if (row.size() != k) {
            throw ConfigError(fmt::format("block {} has {} values, expected {}", b, row.size(), k));
        }
        const auto missing = std::count_if(row.begin(), row.end(), [](double v) { return std::isnan(v); });
        if (static_cast<std::size_t>(missing) == k) throw ConfigError(fmt::format("block {} has no values", b));
        if (missing > 0) {
            ++result.dropped_blocks;
            continue;
        }
        const auto ranks = midranks(row);
        for (std::size_t t = 0; t < k; ++t) rank_sums[t] += ranks[t];
        auto sorted = row;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < k;) {
            std::size_t j = i;
            while (j + 1 < k && sorted[j + 1] == sorted[i]) ++j;
            const double t = static_cast<double>(j - i + 1);
            tie_sum += t * t * t - t;
            i = j + 1;
        }
        ++result.blocks;
    }
    if (result.blocks < 2) {
        throw ConfigError(fmt::format("Friedman test needs at least 2 complete blocks, got {}", result.blocks));
    }

    const double n = static_cast<double>(result.blocks);
    const double kd = static_cast<double>(k);
    double sum_sq = 0.0;
    for (double r : rank_sums) sum_sq += r * r;
    const double raw = 12.0 / (n * kd * (kd + 1.0)) * sum_sq - 3.0 * n * (kd + 1.0);
    const double correction = 1.0 - tie_sum / (n * kd * (kd * kd - 1.0));
    // Every block fully tied: no treatment differs.
    result.statistic = correction <= 1e-12 ? 0.0 : std::max(0.0, raw / correction);
    result.p_value = chi_square_sf(result.statistic, result.df);
    return result;
}

}  // namespace svcdisc
