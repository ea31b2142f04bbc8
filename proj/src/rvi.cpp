#include <algorithm>
#include <climits>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "aoi/solver.hpp"

namespace aoi {

namespace {

// Exact ties (within this margin) resolve to Silent.
constexpr double kTieTol = 1e-12;
constexpr double kDamping = 0.5;
constexpr int kStallLimit = 50;

using Branch = CompiledModel::Branch;

double q_value(const Branch& b, double lambda, const std::vector<double>& v)
{
    double q = b.stage + lambda * b.charge;
    for (std::uint32_t j = 0; j < b.n_succ; ++j) q += b.prob[j] * v[b.succ[j]];
    return q;
}

// Returns the chosen branch index and writes its Q-value.
std::uint8_t greedy(const CompiledModel& m, std::size_t s, double lambda, const std::vector<double>& v,
                    double& best)
{
    const double q0 = q_value(m.branch(s, 0), lambda, v);
    if (m.n_actions(s) == 1) {
        best = q0;
        return 0;
    }
    const double q1 = q_value(m.branch(s, 1), lambda, v);
    if (q0 < q1 - kTieTol) {
        best = q0;
        return 0;
    }
    best = q1;
    return 1;
}

struct SweepCounters {
    std::size_t minimizations = 0;
    std::size_t skipped = 0;
};

class PlainSweep {
public:
    void operator()(const CompiledModel& m, double lambda, const std::vector<double>& v,
                    std::vector<double>& tv, std::vector<std::uint8_t>& choice, SweepCounters& c) const
    {
        for (std::size_t s = 0; s < m.size(); ++s) {
            choice[s] = greedy(m, s, lambda, v, tv[s]);
            if (m.n_actions(s) > 1) ++c.minimizations;
        }
    }
};

// Visits states layer by layer in ascending a_s. A Type1 state is set to
// Update without minimising once any Type1 state in a lower a_s layer chose
// Update this sweep; a Type2 state is set to Update once a Type2 state with the
// same a_p and smaller a_s did.
class StructuredSweep {
public:
    void operator()(const CompiledModel& m, double lambda, const std::vector<double>& v,
                    std::vector<double>& tv, std::vector<std::uint8_t>& choice, SweepCounters& c) const
    {
        const StateSpace& space = m.space();
        const int delta = space.delta();
        bool type1_update_below = false;
        std::vector<int> first_type2_update(static_cast<std::size_t>(delta) + 1, INT_MAX);

        for (int a_s = 1; a_s <= delta; ++a_s) {
            bool type1_update_here = false;
            for (int a_p = 1; a_p <= delta; ++a_p) {
                const auto s1 = space.index({a_p, a_s, false, false});
                if (type1_update_below) {
                    choice[s1] = 0;
                    tv[s1] = q_value(m.branch(s1, 0), lambda, v);
                    ++c.skipped;
                } else {
                    choice[s1] = greedy(m, s1, lambda, v, tv[s1]);
                    ++c.minimizations;
                }
                type1_update_here = type1_update_here || choice[s1] == 0;

                const auto s2 = space.index({a_p, a_s, true, false});
                int& first = first_type2_update[static_cast<std::size_t>(a_p)];
                if (first < a_s) {
                    choice[s2] = 0;
                    tv[s2] = q_value(m.branch(s2, 0), lambda, v);
                    ++c.skipped;
                } else {
                    choice[s2] = greedy(m, s2, lambda, v, tv[s2]);
                    ++c.minimizations;
                    if (choice[s2] == 0) first = std::min(first, a_s);
                }
            }
            type1_update_below = type1_update_below || type1_update_here;
        }
        for (int lam_p = 0; lam_p <= 1; ++lam_p) {
            for (int a_p = 1; a_p <= delta; ++a_p) {
                const auto s3 = space.index({a_p, 1, lam_p == 1, true});
                choice[s3] = greedy(m, s3, lambda, v, tv[s3]);
            }
        }
    }
};

template <class Sweep>
SolveResult run_rvi(const CompiledModel& m, double lambda, const SolveOptions& opts, const Sweep& sweep)
{
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw ParameterError(fmt::format("lambda must be a nonnegative number, got {}", lambda));
    const StateSpace& space = m.space();
    if (!space.contains(opts.reference))
        throw ParameterError(fmt::format("reference state {} not in the state space", to_string(opts.reference)));
    const std::size_t n = m.size();
    const std::size_t s0 = space.index(opts.reference);
    const double eps = m.params().epsilon;

    std::vector<double> v(n, 0.0);
    if (opts.initial != nullptr) {
        if (opts.initial->size() != n) throw ParameterError("warm-start values do not match the state space");
        v = *opts.initial;
        const double ref = v[s0];
        for (auto& x : v) x -= ref;
    }
    std::vector<double> tv(n, 0.0);
    std::vector<std::uint8_t> choice(n, 0);
    SweepCounters counters;

    ValueTable table;
    table.delta = space.delta();
    table.reference = opts.reference;

    double prev_span = std::numeric_limits<double>::infinity();
    int stall = 0;
    long iter = 0;
    double change = 0.0;
    double span = 0.0;
    while (true) {
        if (iter >= opts.max_iter)
            throw ConvergenceError(
                fmt::format("relative value iteration did not converge in {} iterations (span {:.3e})",
                            opts.max_iter, span),
                span, iter);
        sweep(m, lambda, v, tv, choice, counters);
        ++iter;
        const double g = tv[s0];
        change = 0.0;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t s = 0; s < n; ++s) {
            const double diff = (tv[s] - g) - v[s];
            change = std::max(change, std::abs(diff));
            lo = std::min(lo, diff);
            hi = std::max(hi, diff);
            v[s] += table.damped ? kDamping * diff : diff;
        }
        span = hi - lo;
        if (!std::isfinite(change))
            throw ConvergenceError("relative value iteration diverged", span, iter);
        if (change <= eps) break;

        // A span that stops shrinking signals a periodic chain.
        stall = span >= prev_span * (1.0 - 1e-12) ? stall + 1 : 0;
        if (stall >= kStallLimit) table.damped = true;
        prev_span = span;
    }

    // Greedy policy with respect to the converged values.
    sweep(m, lambda, v, tv, choice, counters);
    table.values = std::move(v);
    table.gain_estimate = tv[s0] - table.values[s0];
    table.iterations = iter;
    table.converged = true;
    table.last_change = change;
    table.last_span = span;
    table.minimizations = counters.minimizations;
    table.skipped_minimizations = counters.skipped;

    Policy policy{space.delta(), lambda, std::vector<Action>(n)};
    for (std::size_t s = 0; s < n; ++s) policy.actions[s] = m.branch(s, choice[s]).action;
    return {std::move(table), std::move(policy)};
}

}  // namespace

SolveResult rvi_solve(const CompiledModel& model, double lambda, const SolveOptions& opts)
{
    return run_rvi(model, lambda, opts, PlainSweep{});
}

SolveResult rvi_solve(const ModelParams& params, double lambda, const SolveOptions& opts)
{
    return rvi_solve(CompiledModel(params), lambda, opts);
}

SolveResult structured_rvi_solve(const CompiledModel& model, double lambda, const SolveOptions& opts)
{
    return run_rvi(model, lambda, opts, StructuredSweep{});
}

SolveResult structured_rvi_solve(const ModelParams& params, double lambda, const SolveOptions& opts)
{
    return structured_rvi_solve(CompiledModel(params), lambda, opts);
}

double bellman_residual(const CompiledModel& model, double lambda, const ValueTable& values)
{
    if (values.values.size() != model.size()) throw ContractError("value table does not match the model");
    double worst = 0.0;
    for (std::size_t s = 0; s < model.size(); ++s) {
        double best = 0.0;
        greedy(model, s, lambda, values.values, best);
        worst = std::max(worst, std::abs(best - values.values[s] - values.gain_estimate));
    }
    return worst;
}

}  // namespace aoi
