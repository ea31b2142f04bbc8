#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "aoi/model.hpp"

namespace aoi {

/// Flat, index-based copy of the transition kernel and per-action costs,
/// built once per parameter set so inner loops avoid re-deriving dynamics.
class CompiledModel {
public:
    struct Branch {
        Action action = Action::Silent;
        double stage = 0.0;   ///< stage_cost
        double charge = 0.0;  ///< constraint_cost
        double energy = 0.0;
        std::uint32_t n_succ = 0;
        std::array<std::uint32_t, 2> succ{};
        std::array<double, 2> prob{};
    };

    explicit CompiledModel(const ModelParams& params);

    const ModelParams& params() const { return params_; }
    const StateSpace& space() const { return space_; }
    std::size_t size() const { return space_.size(); }

    /// One or two branches; for decision states branch 0 is Update and
    /// branch 1 is Silent.
    std::size_t n_actions(std::size_t s) const { return n_actions_[s]; }
    const Branch& branch(std::size_t s, std::size_t a) const { return branches_[2 * s + a]; }
    const Branch& branch_for(std::size_t s, Action a) const;

    const SystemState& state(std::size_t s) const { return states_[s]; }

private:
    ModelParams params_;
    StateSpace space_;
    std::vector<SystemState> states_;
    std::vector<std::uint8_t> n_actions_;
    std::vector<Branch> branches_;
};

}  // namespace aoi
