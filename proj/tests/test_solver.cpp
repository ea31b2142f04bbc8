#include <doctest.h>

#include <cmath>
#include <random>

#include "aoi/oracle.hpp"
#include "aoi/solver.hpp"

using namespace aoi;

namespace {

ModelParams instance(double p, double k, double c_e, int delta)
{
    ModelParams m;
    m.p = p;
    m.k = k;
    m.c_e = c_e;
    m.delta = delta;
    return m;
}

double max_gap(const std::vector<double>& a, const std::vector<double>& b)
{
    double g = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) g = std::max(g, std::abs(a[i] - b[i]));
    return g;
}

}  // namespace

TEST_CASE("free updates give eta = 1")
{
    for (double p : {0.1, 0.5, 0.9}) {
        const auto r = rvi_solve(instance(p, 0.0, 8.0, 10), 0.0);
        const auto summary = extract_thresholds(r.policy);
        REQUIRE(summary.eta.has_value());
        CHECK(*summary.eta == 1);
    }
}

TEST_CASE("reference state carries value zero and the fixed point residual is small")
{
    const auto params = instance(0.5, 0.1, 8.0, 20);
    const auto r = rvi_solve(params, 0.9);
    CHECK(r.values.converged);
    CHECK(r.values.at({1, 1, false, false}) == 0.0);
    CHECK(bellman_residual(CompiledModel(params), 0.9, r.values) <= 2 * params.epsilon);

    SolveOptions opts;
    opts.reference = {3, 2, true, false};
    const auto other = rvi_solve(params, 0.9, opts);
    CHECK(other.values.at(opts.reference) == 0.0);
    CHECK(other.policy.actions == r.policy.actions);
    CHECK(other.values.gain_estimate == doctest::Approx(r.values.gain_estimate).epsilon(1e-8));
}

TEST_CASE("solver argument errors")
{
    const auto params = instance(0.5, 0.1, 8.0, 6);
    CHECK_THROWS_AS(rvi_solve(params, -1.0), ParameterError);
    SolveOptions opts;
    opts.reference = {1, 2, false, true};
    CHECK_THROWS_AS(rvi_solve(params, 0.9, opts), ParameterError);
    opts = {};
    opts.max_iter = 2;
    try {
        rvi_solve(params, 0.9, opts);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.iterations() == 2);
        CHECK(e.span() >= 0.0);
    }
    std::vector<double> wrong(3, 0.0);
    opts = {};
    opts.initial = &wrong;
    CHECK_THROWS_AS(structured_rvi_solve(params, 0.9, opts), ParameterError);
}

TEST_CASE("warm start reaches the same fixed point")
{
    const auto params = instance(0.4, 0.2, 8.0, 15);
    const auto cold = rvi_solve(params, 1.3);
    const auto near = rvi_solve(params, 1.2);
    SolveOptions opts;
    opts.initial = &near.values.values;
    const auto warm = rvi_solve(params, 1.3, opts);
    CHECK(warm.policy.actions == cold.policy.actions);
    CHECK(max_gap(warm.values.values, cold.values.values) <= 4 * params.epsilon);
    CHECK(warm.values.iterations <= cold.values.iterations);
}

TEST_CASE("structured and plain iteration agree")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> up(0.05, 0.95), uk(0.0, 1.0), ul(0.0, 5.0);
    std::uniform_int_distribution<int> ud(3, 25);
    for (int trial = 0; trial < 25; ++trial) {
        const auto params = instance(up(rng), uk(rng), 8.0, ud(rng));
        const double lambda = ul(rng);
        CAPTURE(params.p);
        CAPTURE(params.k);
        CAPTURE(params.delta);
        CAPTURE(lambda);
        const auto a = rvi_solve(params, lambda);
        const auto b = structured_rvi_solve(params, lambda);
        CHECK(a.policy.actions == b.policy.actions);
        CHECK(max_gap(a.values.values, b.values.values) <= 2 * params.epsilon);
        CHECK(a.values.iterations == b.values.iterations);
        CHECK(b.values.minimizations + b.values.skipped_minimizations == a.values.minimizations);
        CHECK(a.values.skipped_minimizations == 0);
    }
}

TEST_CASE("structured iteration skips work on the reference instance")
{
    const auto b = structured_rvi_solve(instance(0.5, 0.1, 8.0, 20), 0.9);
    CHECK(b.values.skipped_minimizations > 0);
    const auto small = structured_rvi_solve(instance(0.5, 0.1, 8.0, 4), 0.9);
    const auto plain = rvi_solve(instance(0.5, 0.1, 8.0, 4), 0.9);
    CHECK(max_gap(small.values.values, plain.values.values) <= 2e-9);
}

TEST_CASE("threshold extraction")
{
    ModelParams params = instance(0.5, 0.1, 8.0, 6);
    const StateSpace space(6);
    auto all_update = baseline_policy(params);
    auto s = extract_thresholds(all_update);
    CHECK(s.eta == 1);
    REQUIRE(s.type2_thresholds.size() == 6);
    for (const auto& t : s.type2_thresholds) CHECK_FALSE(t.has_value());
    CHECK(thresholds_nondecreasing(s));

    // Type1 rows that disagree across a_p
    auto bent = all_update;
    bent.actions[space.index({3, 1, false, false})] = Action::Silent;
    try {
        extract_thresholds(bent);
        FAIL("expected StructureError");
    } catch (const StructureError& e) {
        CHECK_FALSE(e.witnesses().empty());
    }

    // a Type2 row that switches on, then back off
    auto row = all_update;
    for (int a_s = 3; a_s <= 6; ++a_s) row.actions[space.index({2, a_s, true, false})] = Action::Update;
    s = extract_thresholds(row);
    CHECK(s.type2_thresholds[1] == 3);
    CHECK_FALSE(s.type2_thresholds[0].has_value());
    CHECK_FALSE(thresholds_nondecreasing(s));
    row.actions[space.index({2, 5, true, false})] = Action::Silent;
    CHECK_THROWS_AS(extract_thresholds(row), StructureError);

    ThresholdSummary decreasing;
    decreasing.type2_thresholds = {3, 2};
    CHECK_FALSE(thresholds_nondecreasing(decreasing));
    decreasing.type2_thresholds = {std::nullopt, 2};
    CHECK_FALSE(thresholds_nondecreasing(decreasing));
    decreasing.type2_thresholds = {2, std::nullopt};
    CHECK(thresholds_nondecreasing(decreasing));
}

TEST_CASE("value structure report")
{
    ValueTable zeros;
    zeros.delta = 8;
    zeros.values.assign(StateSpace(8).size(), 0.0);
    const auto report = verify_value_structure(zeros, instance(0.5, 0.1, 8.0, 8));
    CHECK(report.all_passed());
    for (const auto& c : report.checks) CHECK(c.worst == 0.0);

    const auto params = instance(0.5, 0.1, 8.0, 20);
    const auto solved = rvi_solve(params, 0.9);
    CHECK(verify_value_structure(solved.values, params).all_passed());

    auto dented = solved.values;
    dented.values[StateSpace(20).index({5, 5, false, false})] -= 1.0;
    const auto bad = verify_value_structure(dented, params);
    CHECK_FALSE(bad.all_passed());
}

TEST_CASE("gain is nondecreasing in lambda")
{
    const auto params = instance(0.5, 0.1, 8.0, 12);
    double prev = -1.0;
    for (double lambda : {0.0, 0.1, 0.3, 0.9, 2.0, 5.0, 20.0}) {
        const auto r = structured_rvi_solve(params, lambda);
        CHECK(r.values.gain_estimate >= prev - 1e-8);
        prev = r.values.gain_estimate;
    }
}

TEST_CASE("exact evaluation")
{
    SUBCASE("no arrivals, baseline")
    {
        auto params = instance(0.0, 0.1, 8.0, 10);
        const auto e = policy_evaluation(baseline_policy(params), params);
        CHECK(e.avg_aoi_su == doctest::Approx(1.0));
        CHECK(e.avg_energy == doctest::Approx(0.8));
        CHECK(e.avg_constraint == 0.0);
        CHECK(e.reachable_states >= 1);
    }
    SUBCASE("distribution is normalised and agrees with the dense oracle")
    {
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 40; ++trial) {
            auto params = instance(std::uniform_real_distribution<double>(0.1, 0.9)(rng), 0.3, 8.0, 4);
            auto policy = baseline_policy(params);
            const StateSpace space(4);
            for (std::size_t i = 0; i < policy.actions.size(); ++i)
                if (policy.actions[i] != Action::Forced)
                    policy.actions[i] = (rng() & 1) ? Action::Update : Action::Silent;
            EvalResult e;
            try {
                e = policy_evaluation(policy, params);
            } catch (const EvaluationError&) {
                continue;
            }
            double mass = 0.0;
            for (double x : e.stationary_dist) mass += x;
            CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
            const double lambda = 0.7;
            CHECK(e.avg_lagrangian(lambda) ==
                  doctest::Approx(oracle::average_cost(policy, params, oracle::lagrangian(params, lambda))).epsilon(1e-10));
            CHECK(e.avg_cost == doctest::Approx(e.avg_aoi_su + e.avg_energy).epsilon(1e-12));
        }
    }
    SUBCASE("solved gain equals the evaluated Lagrangian average")
    {
        const auto params = instance(0.5, 0.1, 8.0, 20);
        const auto r = rvi_solve(params, 0.9);
        const auto e = policy_evaluation(r.policy, params);
        CHECK(e.avg_lagrangian(0.9) == doctest::Approx(r.values.gain_estimate).epsilon(1e-8));
    }
    SUBCASE("mixture evaluation blends linearly")
    {
        const auto params = instance(0.5, 0.1, 8.0, 8);
        const auto lo = rvi_solve(params, 0.0).policy;
        auto hi = rvi_solve(params, 3.0).policy;
        const auto a = policy_evaluation(lo, params);
        const auto b = policy_evaluation(hi, params);
        const auto m = policy_evaluation(MixturePolicy{lo, hi, 0.25}, params);
        CHECK(m.avg_cost == doctest::Approx(0.25 * a.avg_cost + 0.75 * b.avg_cost));
        CHECK(m.avg_constraint == doctest::Approx(0.25 * a.avg_constraint + 0.75 * b.avg_constraint));
    }
    SUBCASE("mismatched policy size")
    {
        auto params = instance(0.5, 0.1, 8.0, 8);
        const auto policy = baseline_policy(instance(0.5, 0.1, 8.0, 6));
        CHECK_THROWS(policy_evaluation(policy, params));
    }
}
