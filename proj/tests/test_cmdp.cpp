#include <doctest.h>

#include <cmath>

#include "aoi/cmdp.hpp"

using namespace aoi;

namespace {

ModelParams small(double d)
{
    ModelParams m;
    m.delta = 6;
    m.d = d;
    return m;
}

}  // namespace

TEST_CASE("constraint curve endpoints and monotonicity")
{
    ModelParams params;
    const auto curve = constraint_curve(params, {10.0, 0.0, 3.0, 0.3, 0.9});
    REQUIRE(curve.size() == 5);
    for (std::size_t i = 1; i < curve.size(); ++i) {
        CHECK(curve[i - 1].lambda < curve[i].lambda);
        CHECK(curve[i].constraint_avg <= curve[i - 1].constraint_avg + 1e-9);
        CHECK(curve[i].gain >= curve[i - 1].gain - 1e-9);
    }
    CHECK(curve.front().constraint_avg > 0.0);

    const auto huge = constraint_curve(params, {1e4});
    CHECK(huge[0].constraint_avg == 0.0);

    CHECK_THROWS_AS(constraint_curve(params, {}), ParameterError);
    CHECK_THROWS_AS(constraint_curve(params, {-1.0}), ParameterError);
}

TEST_CASE("rvi and structured curves coincide")
{
    const auto params = small(1.0);
    const auto a = constraint_curve(params, {0.0, 0.02, 0.5, 4.0}, SolverKind::Rvi);
    const auto b = constraint_curve(params, {0.0, 0.02, 0.5, 4.0}, SolverKind::Structured);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].gain == doctest::Approx(b[i].gain).epsilon(1e-12));
        CHECK(a[i].constraint_avg == doctest::Approx(b[i].constraint_avg).epsilon(1e-12));
    }
}

TEST_CASE("dual function is concave along a grid")
{
    const auto params = small(0.4);
    std::vector<double> grid;
    for (int i = 0; i <= 40; ++i) grid.push_back(0.01 * i);
    const auto curve = constraint_curve(params, grid);
    for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
        const double left = curve[i - 1].dual_value(params.d);
        const double mid = curve[i].dual_value(params.d);
        const double right = curve[i + 1].dual_value(params.d);
        CHECK(mid >= 0.5 * (left + right) - 1e-7);
    }
}

TEST_CASE("mixture weight")
{
    CHECK(mixture_weight(1.4, 0.6, 1.0) == doctest::Approx(0.5));
    CHECK(mixture_weight(1.0, 0.6, 1.0) == 1.0);
    CHECK(mixture_weight(1.4, 1.0, 1.0) == 0.0);
    CHECK(mixture_weight(1.0, 1.0, 1.0) == 1.0);
}

TEST_CASE("bisection")
{
    SUBCASE("slack at zero returns (0,0)")
    {
        const auto b = bisect_lambda(small(5.0), 0.0, 1.0, 1e-6);
        CHECK(b.low == 0.0);
        CHECK(b.high == 0.0);
    }
    SUBCASE("binding constraint straddles d")
    {
        auto params = small(0.5);
        std::vector<CurvePoint> trace;
        const auto b = bisect_lambda(params, 0.0, 1.0, 1e-6, &trace);
        CHECK(b.high - b.low <= 1e-6);
        CHECK(trace.size() >= 3);
        const auto ends = constraint_curve(params, {b.low, b.high});
        CHECK(ends[0].constraint_avg >= params.d - 1e-9);
        CHECK(ends[1].constraint_avg <= params.d + 1e-9);
    }
    SUBCASE("bad brackets")
    {
        CHECK_THROWS_AS(bisect_lambda(small(0.5), 1.0, 0.5, 1e-6), BracketError);
        CHECK_THROWS_AS(bisect_lambda(small(0.5), 0.0, 0.001, 1e-6), BracketError);
        CHECK_THROWS_AS(bisect_lambda(small(0.5), 5.0, 10.0, 1e-6), BracketError);
    }
}

TEST_CASE("build mixture meets d")
{
    auto params = small(0.5);
    const auto b = bisect_lambda(params, 0.0, 1.0, 1e-7);
    const auto m = build_mixture(params, b.low, b.high);
    CHECK(m.alpha >= 0.0);
    CHECK(m.alpha <= 1.0);
    const auto e = policy_evaluation(m, params);
    CHECK(e.avg_constraint == doctest::Approx(params.d).epsilon(1e-9));
    CHECK_THROWS_AS(build_mixture(params, 1.0, 0.5), ParameterError);
    CHECK_THROWS_AS(build_mixture(params, 5.0, 6.0), BracketError);

    // never worse than the feasible endpoint
    const auto hi = constraint_curve(params, {b.high});
    CHECK(e.avg_cost <= hi[0].objective_avg + 1e-9);
}

TEST_CASE("solve_cmdp")
{
    SUBCASE("huge d is slack")
    {
        const auto sol = solve_cmdp(small(1e6));
        CHECK(sol.report.slack_at_zero);
        CHECK(sol.report.lambda_star == 0.0);
        CHECK(sol.mixture.alpha == 1.0);
        CHECK(sol.report.duality_gap == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("d = 0 forbids charged relaying")
    {
        const auto sol = solve_cmdp(small(0.0));
        CHECK_FALSE(sol.report.slack_at_zero);
        CHECK(sol.report.blended_constraint == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("binding")
    {
        auto params = small(0.5);
        const auto sol = solve_cmdp(params);
        const auto& r = sol.report;
        CHECK_FALSE(r.slack_at_zero);
        CHECK(std::abs(r.blended_constraint - params.d) <= 1e-6);
        CHECK(r.duality_gap >= -1e-6);
        CHECK(r.duality_gap <= 1e-3 * r.primal_estimate);
        CHECK(r.lambda_low <= r.lambda_star);
        CHECK(r.lambda_star <= r.lambda_high);
        for (std::size_t i = 1; i < r.trace.size(); ++i) {
            CHECK(r.trace[i - 1].lambda < r.trace[i].lambda);
            CHECK(r.trace[i].constraint_avg <= r.trace[i - 1].constraint_avg + 1e-9);
        }
    }
}

TEST_CASE("Robbins-Monro")
{
    SUBCASE("constant estimate at d never moves")
    {
        auto params = small(0.7);
        RobbinsMonroOptions opts;
        opts.steps = 30;
        const auto t = robbins_monro_lambda(params, 1.25, opts, [](double, int) { return 0.7; });
        REQUIRE(t.lambdas.size() == 31);
        for (double l : t.lambdas) CHECK(l == 1.25);
    }
    SUBCASE("slack constraint drives lambda to zero")
    {
        auto params = small(5.0);
        RobbinsMonroOptions opts;
        opts.steps = 20;
        opts.slots_per_estimate = 20'000;
        const auto t = robbins_monro_lambda(params, 2.0, opts);
        CHECK(t.lambdas.back() == 0.0);
        CHECK(t.estimates.size() == 20);
    }
    SUBCASE("schedule errors")
    {
        RobbinsMonroOptions opts;
        opts.step_scale = 0.0;
        CHECK_THROWS_AS(robbins_monro_lambda(small(1.0), 0.0, opts, [](double, int) { return 0.0; }), ParameterError);
        CHECK_THROWS_AS(robbins_monro_lambda(small(1.0), -1.0, {}, [](double, int) { return 0.0; }), ParameterError);
    }
}
