#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aoi/compiled_model.hpp"
#include "aoi/model.hpp"
#include "aoi/policy.hpp"

namespace aoi {

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double span, long iterations)
        : std::runtime_error(what), span_(span), iterations_(iterations)
    {
    }
    double span() const { return span_; }
    long iterations() const { return iterations_; }

private:
    double span_;
    long iterations_;
};

/// Raised when a policy violates the threshold or switch structure.
class StructureError : public std::runtime_error {
public:
    StructureError(const std::string& what, std::vector<SystemState> witnesses)
        : std::runtime_error(what), witnesses_(std::move(witnesses))
    {
    }
    const std::vector<SystemState>& witnesses() const { return witnesses_; }

private:
    std::vector<SystemState> witnesses_;
};

class EvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Relative value function V_λ; values[reference] is 0.
struct ValueTable {
    int delta = 0;
    std::vector<double> values;  ///< indexed by StateSpace::index
    SystemState reference{1, 1, false, false};
    double gain_estimate = 0.0;  ///< estimate of the optimal average cost L*_λ
    long iterations = 0;
    bool converged = false;
    double last_change = 0.0;  ///< sup-norm of the final V_{n+1} − V_n
    double last_span = 0.0;    ///< span of the final V_{n+1} − V_n
    bool damped = false;
    std::size_t minimizations = 0;          ///< argmin evaluations over all sweeps
    std::size_t skipped_minimizations = 0;  ///< argmins avoided by structure

    double at(const SystemState& s) const { return values.at(StateSpace(delta).index(s)); }
};

struct SolveOptions {
    SystemState reference{1, 1, false, false};
    long max_iter = 1'000'000;
    /// Optional starting values (warm start); must match the state space.
    const std::vector<double>* initial = nullptr;
};

struct SolveResult {
    ValueTable values;
    Policy policy;
};

/// Plain relative value iteration on the Lagrangian cost.
SolveResult rvi_solve(const ModelParams& params, double lambda, const SolveOptions& opts = {});
SolveResult rvi_solve(const CompiledModel& model, double lambda, const SolveOptions& opts = {});

/// Relative value iteration that skips the argmin where the threshold and
/// switch structures already decide the action within the current sweep.
SolveResult structured_rvi_solve(const ModelParams& params, double lambda, const SolveOptions& opts = {});
SolveResult structured_rvi_solve(const CompiledModel& model, double lambda, const SolveOptions& opts = {});

/// Bellman residual max_s |min_a{L + E V} − V(s) − gain|.
double bellman_residual(const CompiledModel& model, double lambda, const ValueTable& values);

// --- structure of policies and value functions --------------------------------

struct ThresholdSummary {
    /// Least a_s with Update in Type1 states; empty means never.
    std::optional<int> eta;
    /// Least a_s with Update in Type2 states, one entry per a_p = 1..δ.
    std::vector<std::optional<int>> type2_thresholds;
};

ThresholdSummary extract_thresholds(const Policy& policy);

/// Treats "never" as +∞.
bool thresholds_nondecreasing(const ThresholdSummary& summary);

struct StructureCheck {
    std::string name;
    bool passed = false;
    double worst = 0.0;  ///< largest violation (or residual) seen
    double tolerance = 0.0;
    std::string witness;
};

struct ValueStructureReport {
    std::vector<StructureCheck> checks;
    bool all_passed() const;
};

struct ValueStructureOptions {
    int margin = 2;  ///< interior means every age ≤ δ − margin
    double monotone_tol = -1.0;   ///< default 2ε
    double constant_tol = -1.0;   ///< default 2ε
    double separable_tol = -1.0;  ///< default 10ε
};

/// Monotonicity in both ages, additive separability on Type1 values, and
/// constancy of the buffered-state values over a_p.
ValueStructureReport verify_value_structure(const ValueTable& values, const ModelParams& params,
                                            const ValueStructureOptions& opts = {});

// --- exact evaluation ----------------------------------------------------------

struct EvalResult {
    std::vector<double> stationary_dist;  ///< indexed by StateSpace::index
    double avg_cost = 0.0;
    double avg_constraint = 0.0;
    double avg_aoi_su = 0.0;
    double avg_aoi_pu = 0.0;
    double avg_energy = 0.0;
    std::size_t reachable_states = 0;

    double avg_lagrangian(double lambda) const { return avg_cost + lambda * avg_constraint; }
};

/// Long-run averages of the chain induced by `policy` started at (1,1,0,0).
/// Throws EvaluationError if more than one closed class is reachable.
EvalResult policy_evaluation(const Policy& policy, const ModelParams& params);
EvalResult policy_evaluation(const Policy& policy, const CompiledModel& model);

/// α-blend of the component evaluations (episode-level randomisation).
EvalResult policy_evaluation(const MixturePolicy& policy, const ModelParams& params);

}  // namespace aoi
