// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "svcdisc/json.hpp"

namespace svcdisc {

struct FriedmanResult {
    double statistic = 0.0;
    std::size_t df = 0;
    double p_value = 1.0;
    std::size_t blocks = 0;          // blocks that entered the test
    std::size_t treatments = 0;
    std::size_t dropped_blocks = 0;  // incomplete blocks left out

    bool significant(double alpha = 0.05) const noexcept { return p_value < alpha; }
    Json to_json() const;
};

/// Average ranks (1-based, ascending) with tied values sharing their midrank.
std::vector<double> midranks(const std::vector<double>& values);

/// Friedman test on `table[block][treatment]`, tie-corrected, with the
/// chi-square approximation on treatments - 1 degrees of freedom.
/// NaN marks a missing value; blocks with a missing value are dropped.
/// Throws ConfigError for fewer than 2 treatments or complete blocks,
/// ragged rows, or a block with every value missing.
FriedmanResult friedman(const std::vector<std::vector<double>>& table);

/// Upper tail of the chi-square distribution.
double chi_square_sf(double x, std::size_t df);

}  // namespace svcdisc
