#include "aoi/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "aoi/solver.hpp"

namespace aoi {

// --- random numbers --------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t& state)
{
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Xoshiro256::Xoshiro256(std::uint64_t seed)
{
    for (auto& word : s_) word = splitmix64(seed);
}

Xoshiro256::result_type Xoshiro256::operator()()
{
    auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

// --- configuration and estimates -------------------------------------------------

void SimConfig::validate() const
{
    if (warmup < 0) throw ParameterError(fmt::format("warmup must be nonnegative, got {}", warmup));
    if (horizon <= warmup)
        throw ParameterError(fmt::format("horizon ({}) must exceed warmup ({})", horizon, warmup));
    if (replications < 1) throw ParameterError(fmt::format("replications must be positive, got {}", replications));
}

Estimate make_estimate(std::vector<double> samples)
{
    Estimate e;
    const auto n = samples.size();
    if (n == 0) return e;
    e.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
    if (n == 1) {
        e.half_width = std::numeric_limits<double>::infinity();
    } else {
        double ss = 0.0;
        for (double x : samples) ss += (x - e.mean) * (x - e.mean);
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));
        const boost::math::students_t dist(static_cast<double>(n - 1));
        e.half_width = boost::math::quantile(dist, 0.975) * sd / std::sqrt(static_cast<double>(n));
    }
    e.per_replication = std::move(samples);
    return e;
}

// --- dynamics ----------------------------------------------------------------------

SystemState next_state(const SystemState& s, Action a, bool arrival, int age_cap)
{
    auto older = [age_cap](int age) { return age >= age_cap ? age_cap : age + 1; };
    SystemState n{older(s.a_p), older(s.a_s), arrival, false};
    switch (classify(s)) {
    case StateType::Type1:
        if (a == Action::Forced) break;
        if (a == Action::Update) n.a_s = 1;
        return n;
    case StateType::Type2:
        if (a == Action::Forced) break;
        if (a == Action::Update) {
            n.a_s = 1;
            n.lam_s = true;  // primary packet now waits at the SU
        } else {
            n.a_p = 1;  // direct PU transmission
        }
        return n;
    case StateType::Type3:
        if (a != Action::Forced) break;
        // A fresh arrival is sent directly and the buffered copy dropped;
        // otherwise the relay completes one slot late.
        n.a_p = s.lam_p ? 1 : 2;
        return n;
    }
    throw ContractError(fmt::format("action {} not available in {}", to_string(a), to_string(s)));
}

namespace {

struct ReplicationResult {
    double cost = 0.0;
    double aoi_su = 0.0;
    double aoi_pu = 0.0;
    double energy = 0.0;
    double charge = 0.0;
    bool pu_stale = false;
    bool su_stale = false;
    std::vector<double> running;  // running average cost at checkpoints
};

void check_coverage(const Policy& policy, const ModelParams& params)
{
    if (policy.delta != params.delta)
        throw PolicyCoverageError(
            fmt::format("policy covers delta={} but the model uses delta={}", policy.delta, params.delta));
    if (policy.actions.size() != StateSpace(params.delta).size())
        throw PolicyCoverageError("policy table does not cover the truncated state space");
    try {
        policy.validate();
    } catch (const ContractError& e) {
        throw PolicyCoverageError(e.what());
    }
}

std::uint64_t arrival_seed(const SimConfig& cfg, int rep) { return cfg.seed + static_cast<std::uint64_t>(rep); }

std::uint64_t selector_seed(const SimConfig& cfg, int rep)
{
    return arrival_seed(cfg, rep) ^ 0xA5A5A5A5A5A5A5A5ULL;
}

template <class OnSlot>
void run_slots(const Policy& policy, const ModelParams& params, const SimConfig& cfg, std::uint64_t seed,
               long length, OnSlot&& on_slot)
{
    const StateSpace space(params.delta);
    const int cap = cfg.untruncated_ages ? INT_MAX : params.delta;
    Xoshiro256 rng(seed);
    SystemState s{1, 1, false, false};
    for (long t = 0; t < length; ++t) {
        const Action a = policy.actions[space.index(space.clip(s))];
        const bool arrival = rng.bernoulli(params.p);
        const SystemState n = next_state(s, a, arrival, cap);
        const double energy = energy_cost(a, params);
        const double charge = (s.lam_p && a == Action::Update) ? static_cast<double>(s.a_p) : 0.0;
        on_slot(t, s, a, n, n.a_s + energy, charge, energy);
        s = n;
    }
}

ReplicationResult run_replication(const Policy& policy, const ModelParams& params, const SimConfig& cfg,
                                  std::uint64_t seed, int checkpoints)
{
    ReplicationResult r;
    const long measured = cfg.horizon - cfg.warmup;
    const long half = cfg.warmup + measured / 2;
    const long stride = checkpoints > 0 ? std::max<long>(1, measured / checkpoints) : 0;
    long last_pu_reset = -1;
    long last_su_reset = -1;
    run_slots(policy, params, cfg, seed, cfg.horizon,
              [&](long t, const SystemState& s, Action, const SystemState& n, double cost, double charge,
                  double energy) {
                  if (n.a_p <= 2 && n.a_p <= s.a_p) last_pu_reset = t;
                  if (n.a_s == 1) last_su_reset = t;
                  if (t < cfg.warmup) return;
                  r.cost += cost;
                  r.charge += charge;
                  r.energy += energy;
                  r.aoi_su += s.a_s;
                  r.aoi_pu += s.a_p;
                  const long done = t - cfg.warmup + 1;
                  if (stride > 0 && done % stride == 0) r.running.push_back(r.cost / static_cast<double>(done));
              });
    const auto n = static_cast<double>(measured);
    r.cost /= n;
    r.charge /= n;
    r.energy /= n;
    r.aoi_su /= n;
    r.aoi_pu /= n;
    r.pu_stale = last_pu_reset < half;
    r.su_stale = last_su_reset < half;
    return r;
}

// Runs `body(rep)` for every replication, spread over worker threads.
template <class Body>
void parallel_replications(const SimConfig& cfg, Body&& body)
{
    unsigned workers = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : std::thread::hardware_concurrency();
    workers = std::clamp(workers, 1u, static_cast<unsigned>(cfg.replications));
    if (workers == 1) {
        for (int rep = 0; rep < cfg.replications; ++rep) body(rep);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int rep = next++; rep < cfg.replications; rep = next++) {
                try {
                    body(rep);
                } catch (...) {
                    if (!failed.exchange(true)) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

Metrics aggregate(const std::vector<ReplicationResult>& reps)
{
    auto collect = [&reps](double ReplicationResult::*field) {
        std::vector<double> v;
        v.reserve(reps.size());
        for (const auto& r : reps) v.push_back(r.*field);
        return make_estimate(std::move(v));
    };
    Metrics m;
    m.avg_cost = collect(&ReplicationResult::cost);
    m.avg_aoi_su = collect(&ReplicationResult::aoi_su);
    m.avg_aoi_pu = collect(&ReplicationResult::aoi_pu);
    m.avg_energy = collect(&ReplicationResult::energy);
    m.avg_constraint = collect(&ReplicationResult::charge);
    for (const auto& r : reps) {
        m.pu_nonstationary = m.pu_nonstationary || r.pu_stale;
        m.su_nonstationary = m.su_nonstationary || r.su_stale;
    }
    return m;
}

std::vector<ReplicationResult> run_all(const MixturePolicy& policy, const ModelParams& params,
                                       const SimConfig& cfg, int checkpoints)
{
    std::vector<ReplicationResult> reps(static_cast<std::size_t>(cfg.replications));
    parallel_replications(cfg, [&](int rep) {
        Xoshiro256 selector(selector_seed(cfg, rep));
        const Policy& active = selector.bernoulli(policy.alpha) ? policy.low : policy.high;
        reps[static_cast<std::size_t>(rep)] =
            run_replication(active, params, cfg, arrival_seed(cfg, rep), rep == 0 ? checkpoints : 0);
    });
    return reps;
}

}  // namespace

Metrics simulate(const MixturePolicy& policy, const ModelParams& params, const SimConfig& cfg)
{
    params.validate();
    cfg.validate();
    check_coverage(policy.low, params);
    check_coverage(policy.high, params);
    policy.validate();
    return aggregate(run_all(policy, params, cfg, 0));
}

Metrics simulate(const Policy& policy, const ModelParams& params, const SimConfig& cfg)
{
    params.validate();
    cfg.validate();
    check_coverage(policy, params);
    // alpha = 1 always selects `low`.
    return aggregate(run_all(MixturePolicy{policy, policy, 1.0}, params, cfg, 0));
}

std::vector<TraceRecord> trace(const Policy& policy, const ModelParams& params, const SimConfig& cfg, long length)
{
    params.validate();
    check_coverage(policy, params);
    if (length < 0 || length > 100'000)
        throw ParameterError(fmt::format("trace length must lie in [0, 100000], got {}", length));
    std::vector<TraceRecord> out;
    out.reserve(static_cast<std::size_t>(length));
    run_slots(policy, params, cfg, cfg.seed, length,
              [&](long t, const SystemState& s, Action a, const SystemState&, double cost, double charge, double) {
                  out.push_back({t, s, a, cost, charge});
              });
    return out;
}

Comparison compare(const std::vector<ModelParams>& grid, const SimConfig& cfg, const CompareOptions& opts)
{
    if (grid.empty()) throw ParameterError("comparison grid is empty");
    cfg.validate();
    Comparison out;
    for (const auto& params : grid) {
        params.validate();
        MixturePolicy proposed;
        ComparisonRow row;
        row.p = params.p;
        if (opts.mode == ProposedMode::Constrained) {
            auto sol = solve_cmdp(params);
            proposed = std::move(sol.mixture);
            row.lambda = sol.report.lambda_star;
        } else {
            const CompiledModel model(params);
            auto solved = opts.solver == SolverKind::Structured ? structured_rvi_solve(model, opts.lambda)
                                                                : rvi_solve(model, opts.lambda);
            proposed = MixturePolicy{solved.policy, solved.policy, 1.0};
            row.lambda = opts.lambda;
        }
        const Policy base = baseline_policy(params);
        const auto prop_reps = run_all(proposed, params, cfg, opts.checkpoints);
        const auto base_reps = run_all(MixturePolicy{base, base, 1.0}, params, cfg, opts.checkpoints);

        const Metrics prop = aggregate(prop_reps);
        const Metrics basem = aggregate(base_reps);
        row.cost_proposed = prop.avg_cost;
        row.cost_baseline = basem.avg_cost;
        row.constraint_proposed = prop.avg_constraint;
        std::vector<double> diff;
        for (std::size_t r = 0; r < prop_reps.size(); ++r) diff.push_back(prop_reps[r].cost - base_reps[r].cost);
        row.difference = make_estimate(std::move(diff));
        row.improvement_ratio =
            basem.avg_cost.mean > 0 ? (basem.avg_cost.mean - prop.avg_cost.mean) / basem.avg_cost.mean : 0.0;
        out.rows.push_back(std::move(row));

        const auto& rp = prop_reps.front().running;
        const auto& rb = base_reps.front().running;
        const long measured = cfg.horizon - cfg.warmup;
        const long stride = opts.checkpoints > 0 ? std::max<long>(1, measured / opts.checkpoints) : 0;
        for (std::size_t i = 0; i < std::min(rp.size(), rb.size()); ++i)
            out.convergence.push_back({params.p, static_cast<long>(i + 1) * stride, rp[i], rb[i]});
    }
    return out;
}

}  // namespace aoi
