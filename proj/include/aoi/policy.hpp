#pragma once

#include <vector>

#include "aoi/model.hpp"

namespace aoi {

/// Deterministic stationary policy over the δ-truncated space.
struct Policy {
    int delta = 0;
    double lambda = 0.0;          ///< multiplier the policy was solved under
    std::vector<Action> actions;  ///< indexed by StateSpace::index

    Action at(const SystemState& s) const { return actions.at(StateSpace(delta).index(s)); }

    /// Throws ContractError if the table is the wrong size or assigns an
    /// action that is not available in some state.
    void validate() const;

    friend bool operator==(const Policy&, const Policy&) = default;
};

/// Episode-level randomisation between two deterministic policies: `low` is
/// followed for the whole episode with probability alpha, `high` otherwise.
struct MixturePolicy {
    Policy low;   ///< solved at the smaller multiplier
    Policy high;  ///< solved at the larger multiplier
    double alpha = 1.0;

    void validate() const;
};

/// Type1 → Update, Type2 → Silent, Type3 → Forced.
Policy baseline_policy(const ModelParams& params);

}  // namespace aoi
