#include "aoi/cmdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "aoi/simulator.hpp"

namespace aoi {

namespace {

constexpr double kHitTol = 1e-9;

// Solves π*_λ, reusing the previous values as a warm start.
class LambdaOracle {
public:
    explicit LambdaOracle(const ModelParams& params, SolverKind solver = SolverKind::Structured)
        : model_(params), solver_(solver)
    {
    }

    struct Point {
        CurvePoint curve;
        Policy policy;
    };

    Point at(double lambda)
    {
        SolveOptions opts;
        if (!warm_.empty()) opts.initial = &warm_;
        auto solved = solver_ == SolverKind::Structured ? structured_rvi_solve(model_, lambda, opts)
                                                        : rvi_solve(model_, lambda, opts);
        warm_ = solved.values.values;
        const auto eval = policy_evaluation(solved.policy, model_);
        CurvePoint cp{lambda, eval.avg_lagrangian(lambda), eval.avg_constraint, eval.avg_cost};
        return {cp, std::move(solved.policy)};
    }

    const CompiledModel& model() const { return model_; }

private:
    CompiledModel model_;
    SolverKind solver_;
    std::vector<double> warm_;
};

LambdaBracket bisect(LambdaOracle& oracle, double d, double lo, double hi, double tol,
                     std::vector<CurvePoint>* trace)
{
    if (!(lo >= 0.0) || !(hi > lo)) throw BracketError(fmt::format("invalid bracket [{}, {}]", lo, hi));
    if (!(tol > 0.0)) throw ParameterError("bisection tolerance must be positive");
    auto record = [trace](const CurvePoint& cp) {
        if (trace) trace->push_back(cp);
    };

    const auto at_lo = oracle.at(lo).curve;
    record(at_lo);
    if (at_lo.constraint_avg <= d) {
        if (lo == 0.0) return {0.0, 0.0};
        throw BracketError(fmt::format(
            "constraint at lambda={} is already {} <= d={}; restart from lambda=0", lo, at_lo.constraint_avg, d));
    }
    const auto at_hi = oracle.at(hi).curve;
    record(at_hi);
    if (at_hi.constraint_avg > d)
        throw BracketError(fmt::format("constraint at lambda={} is still {} > d={}; raise the upper end", hi,
                                       at_hi.constraint_avg, d));

    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        const auto cp = oracle.at(mid).curve;
        record(cp);
        if (std::abs(cp.constraint_avg - d) <= kHitTol) return {mid, mid};
        (cp.constraint_avg > d ? lo : hi) = mid;
    }
    return {lo, hi};
}

}  // namespace

std::vector<CurvePoint> constraint_curve(const ModelParams& params, std::vector<double> lambdas, SolverKind solver)
{
    if (lambdas.empty()) throw ParameterError("lambda grid is empty");
    for (double l : lambdas)
        if (!(l >= 0.0)) throw ParameterError(fmt::format("lambda must be nonnegative, got {}", l));
    std::sort(lambdas.begin(), lambdas.end());
    LambdaOracle oracle(params, solver);
    std::vector<CurvePoint> out;
    out.reserve(lambdas.size());
    for (double l : lambdas) out.push_back(oracle.at(l).curve);
    return out;
}

LambdaBracket bisect_lambda(const ModelParams& params, double lo, double hi, double tol,
                            std::vector<CurvePoint>* trace)
{
    LambdaOracle oracle(params);
    return bisect(oracle, params.d, lo, hi, tol, trace);
}

double mixture_weight(double c_low, double c_high, double d)
{
    if (c_low > c_high) return std::clamp((d - c_high) / (c_low - c_high), 0.0, 1.0);
    return 1.0;
}

MixturePolicy build_mixture(const ModelParams& params, double lambda_low, double lambda_high)
{
    if (lambda_low > lambda_high) throw ParameterError("build_mixture expects lambda_low <= lambda_high");
    LambdaOracle oracle(params);
    auto low = oracle.at(lambda_low);
    auto high = oracle.at(lambda_high);
    const double c1 = low.curve.constraint_avg;
    const double c2 = high.curve.constraint_avg;
    if (c1 + kHitTol < params.d || c2 > params.d + kHitTol)
        throw BracketError(fmt::format("endpoint constraints {} and {} do not straddle d={}", c1, c2, params.d));
    return {std::move(low.policy), std::move(high.policy), mixture_weight(c1, c2, params.d)};
}

RobbinsMonroTrace robbins_monro_lambda(const ModelParams& params, double lambda0, const RobbinsMonroOptions& opts,
                                       const ConstraintEstimator& estimate)
{
    params.validate();
    if (!(lambda0 >= 0.0)) throw ParameterError("lambda0 must be nonnegative");
    if (opts.steps < 0 || !(opts.step_scale > 0.0)) throw ParameterError("invalid Robbins-Monro schedule");
    RobbinsMonroTrace out;
    double lambda = lambda0;
    out.lambdas.push_back(lambda);
    for (int n = 1; n <= opts.steps; ++n) {
        const double c_hat = estimate(lambda, n);
        out.estimates.push_back(c_hat);
        lambda = std::max(0.0, lambda + opts.step_scale / n * (c_hat - params.d));
        out.lambdas.push_back(lambda);
    }
    return out;
}

RobbinsMonroTrace robbins_monro_lambda(const ModelParams& params, double lambda0, const RobbinsMonroOptions& opts)
{
    const CompiledModel model(params);
    std::vector<double> warm;
    SimConfig cfg;
    cfg.horizon = opts.slots_per_estimate;
    cfg.warmup = std::min<long>(1000, opts.slots_per_estimate / 10);
    cfg.replications = 1;
    cfg.untruncated_ages = false;
    cfg.threads = 1;
    auto estimator = [&](double lambda, int n) {
        SolveOptions so;
        if (!warm.empty()) so.initial = &warm;
        auto solved = structured_rvi_solve(model, lambda, so);
        warm = solved.values.values;
        cfg.seed = opts.seed + static_cast<std::uint64_t>(n) * 1'000'003ULL;
        return simulate(solved.policy, params, cfg).avg_constraint.mean;
    };
    return robbins_monro_lambda(params, lambda0, opts, estimator);
}

CmdpSolution solve_cmdp(const ModelParams& params, const CmdpOptions& opts)
{
    params.validate();
    LambdaOracle oracle(params);
    DualSolveReport report;
    const double d = params.d;

    auto zero = oracle.at(0.0);
    report.trace.push_back(zero.curve);
    MixturePolicy mixture;
    if (zero.curve.constraint_avg <= d) {
        report.slack_at_zero = true;
        mixture = {zero.policy, zero.policy, 1.0};
    } else {
        double hi = opts.hi_start;
        double lo = 0.0;
        while (true) {
            const auto cp = oracle.at(hi).curve;
            report.trace.push_back(cp);
            if (cp.constraint_avg <= d) break;
            lo = hi;
            if (hi >= opts.hi_cap)
                throw BracketError(fmt::format("constraint still exceeds d={} at lambda={}", d, hi));
            hi *= 2.0;
        }
        const auto bracket = bisect(oracle, d, lo, hi, opts.tol, &report.trace);
        auto low = oracle.at(bracket.low);
        auto high = oracle.at(bracket.high);
        mixture = {std::move(low.policy), std::move(high.policy),
                   mixture_weight(low.curve.constraint_avg, high.curve.constraint_avg, d)};
    }

    const auto eval = policy_evaluation(mixture, params);
    report.lambda_low = mixture.low.lambda;
    report.lambda_high = mixture.high.lambda;
    report.lambda_star = 0.5 * (report.lambda_low + report.lambda_high);
    report.alpha = mixture.alpha;
    report.primal_estimate = eval.avg_cost;
    report.blended_constraint = eval.avg_constraint;
    std::stable_sort(report.trace.begin(), report.trace.end(),
                     [](const CurvePoint& a, const CurvePoint& b) { return a.lambda < b.lambda; });
    report.trace.erase(std::unique(report.trace.begin(), report.trace.end(),
                                   [](const CurvePoint& a, const CurvePoint& b) { return a.lambda == b.lambda; }),
                       report.trace.end());
    report.dual_value = -std::numeric_limits<double>::infinity();
    for (const auto& cp : report.trace) report.dual_value = std::max(report.dual_value, cp.dual_value(d));
    report.duality_gap = report.primal_estimate - report.dual_value;
    return {std::move(mixture), std::move(report)};
}

}  // namespace aoi
