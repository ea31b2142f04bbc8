#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace aoi {

// Errors raised across the library. All derive from std::runtime_error so a
// front end can catch them uniformly.
class ParameterError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// System state (A_p, A_s, Λ_p, Λ_s) observed at the start of a slot.
struct SystemState {
    int a_p = 1;         ///< PU age of information, in slots
    int a_s = 1;         ///< SU age of information, in slots
    bool lam_p = false;  ///< a primary packet arrived at the PU this slot
    bool lam_s = false;  ///< a primary packet is buffered at the SU

    friend bool operator==(const SystemState&, const SystemState&) = default;
};

std::string to_string(const SystemState& s);

enum class StateType { Type1, Type2, Type3 };

/// Update: the SU generates and sends its own packet (buffering a primary
/// packet if one arrived). Silent: the SU stays off the channel. Forced: the
/// only behaviour in a state with a buffered primary packet.
enum class Action : std::uint8_t { Update, Silent, Forced };

std::string_view to_string(Action a);
std::string_view to_string(StateType t);
Action action_from_string(std::string_view name);

struct ModelParams {
    double p = 0.5;
    double k = 0.1;
    double c_e = 8.0;
    double d = 1.0;
    int delta = 20;
    double epsilon = 1e-9;
    /// Charge k·C_e for the relay slot as well. Off by default.
    bool charge_relay_energy = false;

    /// Throws ParameterError describing the first offending field.
    void validate() const;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct Transition {
    SystemState next;
    double prob = 0.0;
};

/// Next-state distribution: one entry per arrival outcome with positive mass.
struct TransitionDist {
    std::array<Transition, 2> entries{};
    std::size_t size = 0;

    const Transition* begin() const { return entries.data(); }
    const Transition* end() const { return entries.data() + size; }
};

/// Dense indexing of the δ-truncated state space. Index order follows
/// (lam_s, lam_p, a_p, a_s) lexicographically; buffered states only carry
/// a_s = 1.
class StateSpace {
public:
    explicit StateSpace(int delta);

    int delta() const { return delta_; }
    std::size_t size() const { return 2 * type_block_ + 2 * static_cast<std::size_t>(delta_); }

    bool contains(const SystemState& s) const;
    std::size_t index(const SystemState& s) const;
    SystemState state(std::size_t index) const;

    /// Clips both ages to δ. Used by simulators tracking unbounded ages.
    SystemState clip(SystemState s) const;

private:
    int delta_;
    std::size_t type_block_;
};

std::vector<SystemState> enumerate_states(const ModelParams& params);

StateType classify(const SystemState& s);

/// Update/Silent for unbuffered states, Forced otherwise.
std::vector<Action> available_actions(const SystemState& s);
bool is_available(const SystemState& s, Action a);

/// Ages after the slot, before the next-arrival branch. Ages saturate at δ.
/// Returned lam_p is meaningless; callers set it from the arrival draw.
SystemState post_decision_state(const SystemState& s, Action a, int delta);

TransitionDist transition(const SystemState& s, Action a, const ModelParams& params);

/// A_s(t+1) + k·C_e·1{a = Update}.
double stage_cost(const SystemState& s, Action a, const ModelParams& params);

/// Energy part of the stage cost (already weighted by k).
double energy_cost(Action a, const ModelParams& params);

/// A_p(t) when a primary packet arrives and the SU takes it (Update), else 0.
double constraint_cost(const SystemState& s, Action a);

double lagrangian_cost(const SystemState& s, Action a, double lambda, const ModelParams& params);

// --- key = value configuration files -------------------------------------

using KeyValues = std::map<std::string, std::string>;

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// skipped. Duplicate keys are an error.
KeyValues parse_key_values(std::string_view text);
KeyValues read_key_values_file(const std::string& path);

/// Applies the model keys found in `kv` on top of `base`, removing them from
/// `kv`. Leftover keys are left for the caller.
ModelParams apply_params(ModelParams base, KeyValues& kv);

/// Strict: any key outside the model set is an error.
ModelParams parse_params(std::string_view text);
std::string format_params(const ModelParams& params);

}  // namespace aoi
