#include <doctest.h>

#include "aoi/oracle.hpp"
#include "aoi/solver.hpp"

using namespace aoi;

namespace {

ModelParams instance(double p, double k, int delta)
{
    ModelParams m;
    m.p = p;
    m.k = k;
    m.delta = delta;
    return m;
}

}  // namespace

TEST_CASE("reachability classes agree with full tables at delta 3")
{
    const auto params = instance(0.5, 0.1, 3);
    const auto classes = oracle::brute_force_optimum(params, 0.9);
    const auto tables = oracle::full_table_optimum(params, 0.9);
    CHECK(classes.policies == 61'124);
    CHECK(tables.policies == (1ULL << 18));
    CHECK(classes.best_gain == doctest::Approx(tables.best_gain).epsilon(1e-12));
}

TEST_CASE("full tables are refused beyond delta 3")
{
    CHECK_THROWS(oracle::full_table_optimum(instance(0.5, 0.1, 4), 0.9));
}

TEST_CASE("rvi attains the exhaustive optimum at delta 3")
{
    for (double p : {0.2, 0.5, 0.8}) {
        for (double lambda : {0.0, 0.9, 4.0}) {
            const auto params = instance(p, 0.2, 3);
            const auto solved = rvi_solve(params, lambda);
            const double mine = oracle::average_cost(solved.policy, params, oracle::lagrangian(params, lambda));
            const auto best = oracle::brute_force_optimum(params, lambda);
            CAPTURE(p);
            CAPTURE(lambda);
            CHECK(mine <= best.best_gain + 1e-9);
            CHECK(mine >= best.best_gain - 1e-9);
        }
    }
}

TEST_CASE("linear program matches rvi")
{
    for (int delta : {3, 4, 6}) {
        for (double lambda : {0.0, 0.9, 3.0}) {
            const auto params = instance(0.5, 0.1, delta);
            const auto solved = rvi_solve(params, lambda);
            const double mine = oracle::average_cost(solved.policy, params, oracle::lagrangian(params, lambda));
            CAPTURE(delta);
            CAPTURE(lambda);
            CHECK(oracle::lp_optimal_gain(params, lambda) == doctest::Approx(mine).epsilon(1e-9));
        }
    }
}

TEST_CASE("linear program lower-bounds the enumeration")
{
    const auto params = instance(0.35, 0.5, 3);
    CHECK(oracle::lp_optimal_gain(params, 1.5) <= oracle::brute_force_optimum(params, 1.5).best_gain + 1e-12);
}

TEST_CASE("dense oracle on the baseline without arrivals")
{
    const auto params = instance(0.0, 0.1, 5);
    const auto cost = [&](const SystemState& s, Action a) { return stage_cost(s, a, params); };
    CHECK(oracle::average_cost(baseline_policy(params), params, cost) == doctest::Approx(1.8));
}
