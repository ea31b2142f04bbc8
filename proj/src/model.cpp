#include "aoi/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace aoi {

std::string to_string(const SystemState& s)
{
    return fmt::format("({},{},{},{})", s.a_p, s.a_s, int(s.lam_p), int(s.lam_s));
}

std::string_view to_string(Action a)
{
    switch (a) {
    case Action::Update: return "update";
    case Action::Silent: return "silent";
    case Action::Forced: return "forced";
    }
    return "?";
}

std::string_view to_string(StateType t)
{
    switch (t) {
    case StateType::Type1: return "type1";
    case StateType::Type2: return "type2";
    case StateType::Type3: return "type3";
    }
    return "?";
}

Action action_from_string(std::string_view name)
{
    if (name == "update") return Action::Update;
    if (name == "silent") return Action::Silent;
    if (name == "forced") return Action::Forced;
    throw ParameterError(fmt::format("unknown action '{}'", name));
}

void ModelParams::validate() const
{
    auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
    if (!(p >= 0.0 && p <= 1.0))
        throw ParameterError(fmt::format("p must lie in [0,1], got {}", p));
    if (!finite_nonneg(k)) throw ParameterError(fmt::format("k must be nonnegative, got {}", k));
    if (!finite_nonneg(c_e)) throw ParameterError(fmt::format("c_e must be nonnegative, got {}", c_e));
    if (!finite_nonneg(d)) throw ParameterError(fmt::format("d must be nonnegative, got {}", d));
    if (delta < 3) throw ParameterError(fmt::format("delta must be at least 3, got {}", delta));
    if (!(std::isfinite(epsilon) && epsilon > 0.0))
        throw ParameterError(fmt::format("epsilon must be positive, got {}", epsilon));
}

// --- StateSpace ------------------------------------------------------------

StateSpace::StateSpace(int delta)
    : delta_(delta), type_block_(static_cast<std::size_t>(delta) * static_cast<std::size_t>(delta))
{
    if (delta < 1) throw ParameterError(fmt::format("delta must be positive, got {}", delta));
}

bool StateSpace::contains(const SystemState& s) const
{
    if (s.a_p < 1 || s.a_p > delta_ || s.a_s < 1 || s.a_s > delta_) return false;
    return !s.lam_s || s.a_s == 1;
}

std::size_t StateSpace::index(const SystemState& s) const
{
    if (!contains(s))
        throw ContractError(fmt::format("state {} outside the delta={} space", to_string(s), delta_));
    const auto ap = static_cast<std::size_t>(s.a_p - 1);
    const auto d = static_cast<std::size_t>(delta_);
    if (s.lam_s) return 2 * type_block_ + (s.lam_p ? d : 0) + ap;
    return (s.lam_p ? type_block_ : 0) + ap * d + static_cast<std::size_t>(s.a_s - 1);
}

SystemState StateSpace::state(std::size_t i) const
{
    const auto d = static_cast<std::size_t>(delta_);
    if (i >= size()) throw ContractError(fmt::format("state index {} out of range", i));
    SystemState s;
    if (i >= 2 * type_block_) {
        i -= 2 * type_block_;
        s.lam_s = true;
        s.lam_p = i >= d;
        s.a_p = static_cast<int>(i % d) + 1;
        s.a_s = 1;
        return s;
    }
    s.lam_p = i >= type_block_;
    i %= type_block_;
    s.a_p = static_cast<int>(i / d) + 1;
    s.a_s = static_cast<int>(i % d) + 1;
    return s;
}

SystemState StateSpace::clip(SystemState s) const
{
    s.a_p = std::min(s.a_p, delta_);
    s.a_s = std::min(s.a_s, delta_);
    return s;
}

std::vector<SystemState> enumerate_states(const ModelParams& params)
{
    params.validate();
    const StateSpace space(params.delta);
    std::vector<SystemState> out;
    out.reserve(space.size());
    for (std::size_t i = 0; i < space.size(); ++i) out.push_back(space.state(i));
    return out;
}

// --- dynamics ----------------------------------------------------------------

StateType classify(const SystemState& s)
{
    if (s.lam_s) return StateType::Type3;
    return s.lam_p ? StateType::Type2 : StateType::Type1;
}

std::vector<Action> available_actions(const SystemState& s)
{
    if (s.lam_s) return {Action::Forced};
    return {Action::Update, Action::Silent};
}

bool is_available(const SystemState& s, Action a)
{
    return s.lam_s ? a == Action::Forced : a != Action::Forced;
}

SystemState post_decision_state(const SystemState& s, Action a, int delta)
{
    if (!is_available(s, a))
        throw ContractError(fmt::format("action {} not available in {}", to_string(a), to_string(s)));
    auto inc = [delta](int age) { return std::min(age + 1, delta); };
    SystemState n;
    if (s.lam_s) {
        // Relay completes (PU age 2), or a fresh primary packet supersedes it.
        n.a_p = s.lam_p ? 1 : 2;
        n.a_s = inc(s.a_s);
        n.lam_s = false;
    } else if (!s.lam_p) {
        n.a_p = inc(s.a_p);
        n.a_s = a == Action::Update ? 1 : inc(s.a_s);
        n.lam_s = false;
    } else if (a == Action::Update) {
        n.a_p = inc(s.a_p);
        n.a_s = 1;
        n.lam_s = true;
    } else {
        n.a_p = 1;
        n.a_s = inc(s.a_s);
        n.lam_s = false;
    }
    return n;
}

TransitionDist transition(const SystemState& s, Action a, const ModelParams& params)
{
    SystemState base = post_decision_state(s, a, params.delta);
    TransitionDist dist;
    if (params.p > 0.0) {
        base.lam_p = true;
        dist.entries[dist.size++] = {base, params.p};
    }
    if (params.p < 1.0) {
        base.lam_p = false;
        dist.entries[dist.size++] = {base, 1.0 - params.p};
    }
    return dist;
}

double energy_cost(Action a, const ModelParams& params)
{
    if (a == Action::Update || (a == Action::Forced && params.charge_relay_energy))
        return params.k * params.c_e;
    return 0.0;
}

double stage_cost(const SystemState& s, Action a, const ModelParams& params)
{
    return post_decision_state(s, a, params.delta).a_s + energy_cost(a, params);
}

double constraint_cost(const SystemState& s, Action a)
{
    if (!is_available(s, a))
        throw ContractError(fmt::format("action {} not available in {}", to_string(a), to_string(s)));
    return (s.lam_p && a == Action::Update) ? static_cast<double>(s.a_p) : 0.0;
}

double lagrangian_cost(const SystemState& s, Action a, double lambda, const ModelParams& params)
{
    if (!(lambda >= 0.0)) throw ParameterError(fmt::format("lambda must be nonnegative, got {}", lambda));
    return stage_cost(s, a, params) + lambda * constraint_cost(s, a);
}

// --- configuration -----------------------------------------------------------

namespace {

std::string_view trim(std::string_view v)
{
    const auto first = v.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = v.find_last_not_of(" \t\r");
    return v.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& value)
{
    double out = 0.0;
    const auto* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end)
        throw ParameterError(fmt::format("{}: '{}' is not a number", key, value));
    return out;
}

int parse_int(const std::string& key, const std::string& value)
{
    int out = 0;
    const auto* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end)
        throw ParameterError(fmt::format("{}: '{}' is not an integer", key, value));
    return out;
}

bool parse_bool(const std::string& key, const std::string& value)
{
    if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "off" || value == "no") return false;
    throw ParameterError(fmt::format("{}: '{}' is not a boolean", key, value));
}

}  // namespace

KeyValues parse_key_values(std::string_view text)
{
    KeyValues kv;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const auto raw = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ParameterError(fmt::format("config line {}: expected 'key = value'", line_no));
        std::string key(trim(line.substr(0, eq)));
        std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) throw ParameterError(fmt::format("config line {}: empty key", line_no));
        if (!kv.emplace(key, value).second)
            throw ParameterError(fmt::format("config line {}: duplicate key '{}'", line_no, key));
    }
    return kv;
}

KeyValues read_key_values_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ParameterError(fmt::format("cannot open config file '{}'", path));
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_key_values(buf.str());
}

ModelParams apply_params(ModelParams base, KeyValues& kv)
{
    auto take = [&kv](const char* key, auto&& apply) {
        auto it = kv.find(key);
        if (it == kv.end()) return;
        apply(it->first, it->second);
        kv.erase(it);
    };
    take("p", [&](auto& k, auto& v) { base.p = parse_double(k, v); });
    take("k", [&](auto& k, auto& v) { base.k = parse_double(k, v); });
    take("c_e", [&](auto& k, auto& v) { base.c_e = parse_double(k, v); });
    take("d", [&](auto& k, auto& v) { base.d = parse_double(k, v); });
    take("delta", [&](auto& k, auto& v) { base.delta = parse_int(k, v); });
    take("epsilon", [&](auto& k, auto& v) { base.epsilon = parse_double(k, v); });
    take("charge_relay_energy", [&](auto& k, auto& v) { base.charge_relay_energy = parse_bool(k, v); });
    return base;
}

ModelParams parse_params(std::string_view text)
{
    auto kv = parse_key_values(text);
    auto params = apply_params(ModelParams{}, kv);
    if (!kv.empty()) throw ParameterError(fmt::format("unknown config key '{}'", kv.begin()->first));
    params.validate();
    return params;
}

std::string format_params(const ModelParams& params)
{
    return fmt::format(
        "p = {}\nk = {}\nc_e = {}\nd = {}\ndelta = {}\nepsilon = {}\ncharge_relay_energy = {}\n",
        params.p, params.k, params.c_e, params.d, params.delta, params.epsilon,
        params.charge_relay_energy ? "true" : "false");
}

}  // namespace aoi
