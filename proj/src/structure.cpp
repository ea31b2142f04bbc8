#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "aoi/solver.hpp"

namespace aoi {

namespace {

// Least a_s with Update on the row (a_p, ·, lam_p, 0); throws if Update is
// not kept for every larger a_s.
std::optional<int> row_threshold(const Policy& policy, const StateSpace& space, int a_p, bool lam_p)
{
    std::optional<int> first;
    for (int a_s = 1; a_s <= space.delta(); ++a_s) {
        const SystemState s{a_p, a_s, lam_p, false};
        const bool update = policy.actions[space.index(s)] == Action::Update;
        if (update && !first) first = a_s;
        if (!update && first) {
            const SystemState w{a_p, *first, lam_p, false};
            throw StructureError(
                fmt::format("{} policy is not monotone in a_s: update at {} but silent at {}",
                            lam_p ? "type2" : "type1", to_string(w), to_string(s)),
                {w, s});
        }
    }
    return first;
}

}  // namespace

ThresholdSummary extract_thresholds(const Policy& policy)
{
    policy.validate();
    const StateSpace space(policy.delta);
    ThresholdSummary summary;

    for (int a_p = 1; a_p <= space.delta(); ++a_p) {
        const auto t = row_threshold(policy, space, a_p, false);
        if (a_p == 1) {
            summary.eta = t;
        } else if (t != summary.eta) {
            const int a_s = std::min(t.value_or(INT32_MAX), summary.eta.value_or(INT32_MAX));
            const SystemState w1{1, a_s, false, false};
            const SystemState w2{a_p, a_s, false, false};
            throw StructureError(
                fmt::format("type1 policy depends on a_p: {} chooses {} but {} chooses {}", to_string(w1),
                            to_string(policy.at(w1)), to_string(w2), to_string(policy.at(w2))),
                {w1, w2});
        }
    }
    summary.type2_thresholds.reserve(static_cast<std::size_t>(space.delta()));
    for (int a_p = 1; a_p <= space.delta(); ++a_p)
        summary.type2_thresholds.push_back(row_threshold(policy, space, a_p, true));
    return summary;
}

bool thresholds_nondecreasing(const ThresholdSummary& summary)
{
    constexpr int never = std::numeric_limits<int>::max();
    int prev = 0;
    for (const auto& t : summary.type2_thresholds) {
        const int cur = t.value_or(never);
        if (cur < prev) return false;
        prev = cur;
    }
    return true;
}

bool ValueStructureReport::all_passed() const
{
    return std::all_of(checks.begin(), checks.end(), [](const StructureCheck& c) { return c.passed; });
}

ValueStructureReport verify_value_structure(const ValueTable& values, const ModelParams& params,
                                            const ValueStructureOptions& opts)
{
    const StateSpace space(values.delta);
    if (values.values.size() != space.size()) throw ContractError("value table has the wrong size");
    const double eps = params.epsilon;
    const double mono_tol = opts.monotone_tol >= 0 ? opts.monotone_tol : 2 * eps;
    const double const_tol = opts.constant_tol >= 0 ? opts.constant_tol : 2 * eps;
    const double sep_tol = opts.separable_tol >= 0 ? opts.separable_tol : 10 * eps;
    const int top = std::max(1, values.delta - opts.margin);
    auto v = [&](const SystemState& s) { return values.values[space.index(s)]; };

    ValueStructureReport report;

    // Monotonicity: worst drop V(x) − V(x + e_i) over interior neighbours.
    auto monotone = [&](const char* name, bool along_ap) {
        StructureCheck c{name, true, 0.0, mono_tol, {}};
        auto consider = [&](const SystemState& lo, const SystemState& hi) {
            const double drop = v(lo) - v(hi);
            if (drop > c.worst) {
                c.worst = drop;
                c.witness = fmt::format("{} -> {}", to_string(lo), to_string(hi));
            }
        };
        for (int lam_p = 0; lam_p <= 1; ++lam_p) {
            for (int a_p = 1; a_p <= top; ++a_p) {
                for (int a_s = 1; a_s <= top; ++a_s) {
                    const SystemState s{a_p, a_s, lam_p == 1, false};
                    SystemState n = s;
                    (along_ap ? n.a_p : n.a_s) += 1;
                    if (n.a_p <= top && n.a_s <= top) consider(s, n);
                }
                if (along_ap && a_p < top) consider({a_p, 1, lam_p == 1, true}, {a_p + 1, 1, lam_p == 1, true});
            }
        }
        c.passed = c.worst <= mono_tol;
        report.checks.push_back(std::move(c));
    };
    monotone("monotone_in_a_p", true);
    monotone("monotone_in_a_s", false);

    // Additive fit f(a_p) + g(a_s) on the interior Type1 grid. On a complete
    // grid the least-squares fit is row mean + column mean − grand mean.
    {
        StructureCheck c{"separable_type1", true, 0.0, sep_tol, {}};
        const auto m = static_cast<std::size_t>(top);
        std::vector<double> row(m, 0.0), col(m, 0.0);
        double grand = 0.0;
        for (int a_p = 1; a_p <= top; ++a_p) {
            for (int a_s = 1; a_s <= top; ++a_s) {
                const double x = v({a_p, a_s, false, false});
                row[static_cast<std::size_t>(a_p - 1)] += x;
                col[static_cast<std::size_t>(a_s - 1)] += x;
                grand += x;
            }
        }
        for (auto& x : row) x /= static_cast<double>(m);
        for (auto& x : col) x /= static_cast<double>(m);
        grand /= static_cast<double>(m * m);
        for (int a_p = 1; a_p <= top; ++a_p) {
            for (int a_s = 1; a_s <= top; ++a_s) {
                const SystemState s{a_p, a_s, false, false};
                const double fit =
                    row[static_cast<std::size_t>(a_p - 1)] + col[static_cast<std::size_t>(a_s - 1)] - grand;
                const double r = std::abs(v(s) - fit);
                if (r > c.worst) {
                    c.worst = r;
                    c.witness = to_string(s);
                }
            }
        }
        c.passed = c.worst <= sep_tol;
        report.checks.push_back(std::move(c));
    }

    // Buffered states: V(a_p,1,lam_p,1) constant over a_p.
    for (int lam_p = 1; lam_p >= 0; --lam_p) {
        StructureCheck c{lam_p ? "constant_buffered_arrival" : "constant_buffered_idle", true, 0.0, const_tol, {}};
        const double base = v({1, 1, lam_p == 1, true});
        for (int a_p = 2; a_p <= top; ++a_p) {
            const SystemState s{a_p, 1, lam_p == 1, true};
            const double dev = std::abs(v(s) - base);
            if (dev > c.worst) {
                c.worst = dev;
                c.witness = to_string(s);
            }
        }
        c.passed = c.worst <= const_tol;
        report.checks.push_back(std::move(c));
    }
    return report;
}

}  // namespace aoi
