#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "aoi/model.hpp"
#include "aoi/policy.hpp"

// Reference computations used to check the solver. They are built directly on
// the model operations and share no code with the solver or evaluator.
namespace aoi::oracle {

/// Per-state stage cost under a fixed action.
using CostFn = std::function<double(const SystemState&, Action)>;

CostFn lagrangian(const ModelParams& params, double lambda);

/// Long-run average cost from (1,1,0,0) by dense linear algebra: per closed
/// class stationary averages weighted by absorption probabilities. Handles
/// chains with several closed classes.
double average_cost(const Policy& policy, const ModelParams& params, const CostFn& cost);

struct BruteForceResult {
    double best_gain = 0.0;
    Policy best_policy;          ///< unreachable decision states set to Silent
    std::uint64_t policies = 0;  ///< distinct policies on their reachable sets
};

/// Enumerates every deterministic stationary policy, identifying policies
/// that agree on the states they reach from (1,1,0,0). Exponential in the
/// number of decision states: δ = 3 has 61 124 classes, δ = 4 about 10^8.
BruteForceResult brute_force_optimum(const ModelParams& params, double lambda);

/// Average of every action table over the full space (2^decision-states).
/// Only for δ = 3 and below; cross-checks brute_force_optimum.
BruteForceResult full_table_optimum(const ModelParams& params, double lambda);

/// Minimum average Lagrangian cost over all stationary policies, from the
/// occupation-measure linear program solved by a dense two-phase simplex.
double lp_optimal_gain(const ModelParams& params, double lambda);

}  // namespace aoi::oracle
