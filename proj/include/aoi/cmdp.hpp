#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "aoi/model.hpp"
#include "aoi/policy.hpp"
#include "aoi/solver.hpp"

namespace aoi {

class BracketError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// π*_λ evaluated exactly: gain is its average Lagrangian cost.
struct CurvePoint {
    double lambda = 0.0;
    double gain = 0.0;
    double constraint_avg = 0.0;
    double objective_avg = 0.0;

    double dual_value(double d) const { return gain - lambda * d; }
};

enum class SolverKind { Rvi, Structured };

/// Solves and evaluates π*_λ for every λ; sorted by λ on return.
std::vector<CurvePoint> constraint_curve(const ModelParams& params, std::vector<double> lambdas,
                                         SolverKind solver = SolverKind::Structured);

struct LambdaBracket {
    double low = 0.0;   ///< last λ seen with constraint ≥ d
    double high = 0.0;  ///< last λ seen with constraint ≤ d
};

/// Bisection on λ over [lo, hi]. Every evaluated point is appended to
/// `trace` when given.
LambdaBracket bisect_lambda(const ModelParams& params, double lo, double hi, double tol,
                            std::vector<CurvePoint>* trace = nullptr);

/// α = (d − C₂)/(C₁ − C₂) between π*_{λ₁} and π*_{λ₂}.
MixturePolicy build_mixture(const ModelParams& params, double lambda_low, double lambda_high);

/// α for the given endpoint constraint averages; 1 when they coincide.
double mixture_weight(double c_low, double c_high, double d);

struct RobbinsMonroOptions {
    int steps = 200;
    double step_scale = 1.0;  ///< a_n = step_scale / n
    long slots_per_estimate = 100'000;
    std::uint64_t seed = 2024;
};

struct RobbinsMonroTrace {
    std::vector<double> lambdas;    ///< λ₀, λ₁, …, λ_steps
    std::vector<double> estimates;  ///< Ĉ_n used for each update
};

/// Constraint estimator Ĉ(λ, n) used by the stochastic approximation.
using ConstraintEstimator = std::function<double(double lambda, int n)>;

/// λ_{n+1} = max(0, λ_n + a_n (Ĉ_n − d)) with Ĉ_n from a simulation of π*_{λ_n}
/// on the truncated model.
RobbinsMonroTrace robbins_monro_lambda(const ModelParams& params, double lambda0,
                                       const RobbinsMonroOptions& opts = {});
RobbinsMonroTrace robbins_monro_lambda(const ModelParams& params, double lambda0,
                                       const RobbinsMonroOptions& opts, const ConstraintEstimator& estimate);

struct DualSolveReport {
    double lambda_star = 0.0;
    double lambda_low = 0.0;
    double lambda_high = 0.0;
    double alpha = 1.0;
    double primal_estimate = 0.0;  ///< objective of the mixture
    double blended_constraint = 0.0;
    double dual_value = 0.0;       ///< max over the trace of gain − λd
    double duality_gap = 0.0;
    bool slack_at_zero = false;    ///< constraint already met by π*_0
    std::vector<CurvePoint> trace;
};

struct CmdpOptions {
    double tol = 1e-6;         ///< bisection width on λ
    double hi_start = 1.0;
    double hi_cap = 1048576.0;  ///< 2^20
};

struct CmdpSolution {
    MixturePolicy mixture;
    DualSolveReport report;
};

CmdpSolution solve_cmdp(const ModelParams& params, const CmdpOptions& opts = {});

}  // namespace aoi
