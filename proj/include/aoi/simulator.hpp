#pragma once

#include <climits>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "aoi/cmdp.hpp"
#include "aoi/model.hpp"
#include "aoi/policy.hpp"

namespace aoi {

class PolicyCoverageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// xoshiro256** seeded through splitmix64. Bernoulli draws compare the top
/// 53 bits against p so streams are reproducible across standard libraries.
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()();

    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
    bool bernoulli(double p) { return uniform() < p; }

private:
    std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

struct SimConfig {
    long horizon = 1'000'000;
    std::uint64_t seed = 1;
    int replications = 20;
    long warmup = 1'000;
    bool untruncated_ages = true;
    int threads = 0;  ///< 0 = hardware concurrency

    void validate() const;
};

/// Mean over replications with a 95% Student-t half-width.
struct Estimate {
    double mean = 0.0;
    double half_width = 0.0;
    std::vector<double> per_replication;

    bool covers(double x) const { return x >= mean - half_width && x <= mean + half_width; }
};

Estimate make_estimate(std::vector<double> samples);

struct Metrics {
    Estimate avg_cost;
    Estimate avg_aoi_su;
    Estimate avg_aoi_pu;
    Estimate avg_energy;
    Estimate avg_constraint;
    /// The age never reset during the second half of some replication, so
    /// its average reflects the horizon rather than a steady state.
    bool pu_nonstationary = false;
    bool su_nonstationary = false;
};

/// Post-slot state for a given arrival outcome. Ages saturate at `age_cap`.
SystemState next_state(const SystemState& s, Action a, bool arrival, int age_cap = INT_MAX);

Metrics simulate(const Policy& policy, const ModelParams& params, const SimConfig& cfg);
/// The active component is drawn once per replication from a stream
/// separate from the arrivals.
Metrics simulate(const MixturePolicy& policy, const ModelParams& params, const SimConfig& cfg);

struct TraceRecord {
    long t = 0;
    SystemState state;
    Action action = Action::Silent;
    double cost = 0.0;
    double charge = 0.0;
};

/// One replication (seed cfg.seed) from (1,1,0,0), no warmup.
std::vector<TraceRecord> trace(const Policy& policy, const ModelParams& params, const SimConfig& cfg, long length);

struct ComparisonRow {
    double p = 0.0;
    double lambda = 0.0;  ///< multiplier of the proposed policy (λ* when constrained)
    Estimate cost_proposed;
    Estimate cost_baseline;
    Estimate difference;  ///< paired per replication: proposed − baseline
    Estimate constraint_proposed;
    double improvement_ratio = 0.0;  ///< (baseline − proposed) / baseline
};

struct ConvergencePoint {
    double p = 0.0;
    long slot = 0;
    double proposed = 0.0;  ///< running average cost, replication 0
    double baseline = 0.0;
};

enum class ProposedMode { Constrained, Unconstrained };

struct CompareOptions {
    ProposedMode mode = ProposedMode::Unconstrained;
    double lambda = 0.9;
    SolverKind solver = SolverKind::Structured;
    int checkpoints = 50;
};

struct Comparison {
    std::vector<ComparisonRow> rows;
    std::vector<ConvergencePoint> convergence;
};

/// Proposed versus baseline over a parameter grid, using common random
/// numbers per replication.
Comparison compare(const std::vector<ModelParams>& grid, const SimConfig& cfg, const CompareOptions& opts = {});

}  // namespace aoi
