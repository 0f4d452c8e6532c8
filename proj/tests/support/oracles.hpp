// SPDX-License-Identifier: Apache-2.0
// Reference implementations the library is checked against. They follow the
// textbook definitions and share no code with the library.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "svcdisc/openapi.hpp"

namespace svcdisc::testing {

struct OracleHit {
    std::uint32_t id;
    double score;
};

/// Scores every vector, sorts all of them (score desc, id asc) and keeps k.
std::vector<OracleHit> brute_force_top_k(const std::vector<std::vector<float>>& vectors,
                                         const std::vector<float>& query, std::size_t k);

/// Friedman statistic in Conover's tie-corrected form:
///   T = (k-1) * sum_j (R_j - n(k+1)/2)^2 / (A - C),
///   A = sum of squared within-block ranks, C = n k (k+1)^2 / 4.
/// Returns 0 when A == C (every block fully tied).
double conover_friedman(const std::vector<std::vector<double>>& table);

struct CraftStep {
    std::size_t view;  // 0 summary, 1 name, 2 description
    EndpointId appended;
};

struct CraftSimulation {
    std::vector<CraftStep> steps;
    std::vector<EndpointId> accepted;
    std::vector<std::size_t> accepted_at;  // 1-based step numbers
    bool exhausted = false;
};

/// Plays the round-robin merge one append at a time: view 0, 1, 2, 0, ...
/// Each view appends its next ranked endpoint not yet in its own set, then
/// every endpoint present in two or more sets is accepted in the order the
/// condition first holds. Stops at k acceptances or when no view can append.
CraftSimulation simulate_craft(const std::array<std::vector<EndpointId>, 3>& ranked, std::size_t k);

}  // namespace svcdisc::testing
