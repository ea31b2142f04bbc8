#include "aoi/policy.hpp"

#include <fmt/format.h>

namespace aoi {

void Policy::validate() const
{
    const StateSpace space(delta);
    if (actions.size() != space.size())
        throw ContractError(fmt::format("policy has {} entries, delta={} space has {}", actions.size(),
                                        delta, space.size()));
    for (std::size_t i = 0; i < actions.size(); ++i) {
        const auto s = space.state(i);
        if (!is_available(s, actions[i]))
            throw ContractError(
                fmt::format("policy assigns {} to {}", to_string(actions[i]), to_string(s)));
    }
}

void MixturePolicy::validate() const
{
    low.validate();
    high.validate();
    if (low.delta != high.delta) throw ContractError("mixture components have different delta");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw ContractError(fmt::format("mixture weight {} outside [0,1]", alpha));
    if (low.lambda > high.lambda)
        throw ContractError("mixture components are not ordered by multiplier");
}

Policy baseline_policy(const ModelParams& params)
{
    params.validate();
    const StateSpace space(params.delta);
    Policy policy{params.delta, 0.0, std::vector<Action>(space.size())};
    for (std::size_t i = 0; i < space.size(); ++i) {
        switch (classify(space.state(i))) {
        case StateType::Type1: policy.actions[i] = Action::Update; break;
        case StateType::Type2: policy.actions[i] = Action::Silent; break;
        case StateType::Type3: policy.actions[i] = Action::Forced; break;
        }
    }
    return policy;
}

}  // namespace aoi
