#include "aoi/compiled_model.hpp"

#include <fmt/format.h>

namespace aoi {

CompiledModel::CompiledModel(const ModelParams& params)
    : params_(params), space_((params.validate(), params.delta))
{
    const std::size_t n = space_.size();
    states_.reserve(n);
    n_actions_.resize(n);
    branches_.resize(2 * n);
    for (std::size_t s = 0; s < n; ++s) {
        const auto state = space_.state(s);
        states_.push_back(state);
        const auto actions = available_actions(state);
        n_actions_[s] = static_cast<std::uint8_t>(actions.size());
        for (std::size_t a = 0; a < actions.size(); ++a) {
            Branch& b = branches_[2 * s + a];
            b.action = actions[a];
            b.stage = stage_cost(state, actions[a], params_);
            b.charge = constraint_cost(state, actions[a]);
            b.energy = energy_cost(actions[a], params_);
            const auto dist = transition(state, actions[a], params_);
            b.n_succ = static_cast<std::uint32_t>(dist.size);
            for (std::size_t j = 0; j < dist.size; ++j) {
                b.succ[j] = static_cast<std::uint32_t>(space_.index(dist.entries[j].next));
                b.prob[j] = dist.entries[j].prob;
            }
        }
    }
}

const CompiledModel::Branch& CompiledModel::branch_for(std::size_t s, Action a) const
{
    for (std::size_t i = 0; i < n_actions_[s]; ++i)
        if (branches_[2 * s + i].action == a) return branches_[2 * s + i];
    throw ContractError(fmt::format("action {} not available in {}", to_string(a), to_string(states_[s])));
}

}  // namespace aoi
