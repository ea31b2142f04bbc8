#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "aoi/cmdp.hpp"
#include "aoi/io.hpp"
#include "aoi/model.hpp"
#include "aoi/oracle.hpp"
#include "aoi/simulator.hpp"
#include "aoi/solver.hpp"

namespace aoi::cli {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Overrides {
    std::string config;
    std::optional<double> p, k, ce, d, epsilon, lambda;
    std::optional<int> delta, reps, threads;
    std::optional<long> horizon, warmup;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out, solver, mode;
    bool truncated_ages = false;
};

struct RunConfig {
    ModelParams params;
    SimConfig sim;
    double lambda = 0.9;
    std::string out = ".";
    SolverKind solver = SolverKind::Structured;
    ProposedMode mode = ProposedMode::Unconstrained;
};

SolverKind parse_solver(const std::string& v)
{
    if (v == "rvi") return SolverKind::Rvi;
    if (v == "structured") return SolverKind::Structured;
    throw UsageError(fmt::format("unknown solver '{}' (expected rvi or structured)", v));
}

ProposedMode parse_mode(const std::string& v)
{
    if (v == "constrained") return ProposedMode::Constrained;
    if (v == "unconstrained") return ProposedMode::Unconstrained;
    throw UsageError(fmt::format("unknown mode '{}' (expected constrained or unconstrained)", v));
}

template <class T>
T parse_number(const std::string& key, const std::string& v)
{
    T out{};
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ParameterError(fmt::format("{}: '{}' is not a valid number", key, v));
    return out;
}

RunConfig resolve(const Overrides& o)
{
    RunConfig rc;
    if (!o.config.empty()) {
        auto kv = read_key_values_file(o.config);
        rc.params = apply_params(rc.params, kv);
        for (const auto& [key, value] : kv) {
            if (key == "lambda") rc.lambda = parse_number<double>(key, value);
            else if (key == "seed") rc.sim.seed = parse_number<std::uint64_t>(key, value);
            else if (key == "horizon") rc.sim.horizon = parse_number<long>(key, value);
            else if (key == "reps") rc.sim.replications = parse_number<int>(key, value);
            else if (key == "warmup") rc.sim.warmup = parse_number<long>(key, value);
            else if (key == "threads") rc.sim.threads = parse_number<int>(key, value);
            else if (key == "untruncated_ages") rc.sim.untruncated_ages = value == "true" || value == "1";
            else if (key == "solver") rc.solver = parse_solver(value);
            else if (key == "mode") rc.mode = parse_mode(value);
            else if (key == "out") rc.out = value;
            else throw ParameterError(fmt::format("unknown config key '{}'", key));
        }
    }
    if (o.p) rc.params.p = *o.p;
    if (o.k) rc.params.k = *o.k;
    if (o.ce) rc.params.c_e = *o.ce;
    if (o.d) rc.params.d = *o.d;
    if (o.delta) rc.params.delta = *o.delta;
    if (o.epsilon) rc.params.epsilon = *o.epsilon;
    if (o.lambda) rc.lambda = *o.lambda;
    if (o.seed) rc.sim.seed = *o.seed;
    if (o.horizon) rc.sim.horizon = *o.horizon;
    if (o.reps) rc.sim.replications = *o.reps;
    if (o.warmup) rc.sim.warmup = *o.warmup;
    if (o.threads) rc.sim.threads = *o.threads;
    if (o.truncated_ages) rc.sim.untruncated_ages = false;
    if (o.solver) rc.solver = parse_solver(*o.solver);
    if (o.mode) rc.mode = parse_mode(*o.mode);
    if (o.out) rc.out = *o.out;
    rc.params.validate();
    if (!(rc.lambda >= 0.0)) throw ParameterError("lambda must be nonnegative");
    return rc;
}

void add_common(CLI::App* app, Overrides& o)
{
    app->add_option("--config", o.config, "key = value configuration file");
    app->add_option("--p", o.p, "primary packet arrival probability");
    app->add_option("--k", o.k, "energy weight");
    app->add_option("--ce", o.ce, "energy per generated packet");
    app->add_option("--d", o.d, "bound on the average PU age charge");
    app->add_option("--delta", o.delta, "age truncation");
    app->add_option("--epsilon", o.epsilon, "value iteration tolerance");
    app->add_option("--lambda", o.lambda, "Lagrange multiplier (unconstrained mode)");
    app->add_option("--seed", o.seed, "base random seed");
    app->add_option("--horizon", o.horizon, "slots per replication");
    app->add_option("--reps", o.reps, "replications");
    app->add_option("--warmup", o.warmup, "slots discarded before averaging");
    app->add_option("--threads", o.threads, "worker threads for replications (0 = all cores)");
    app->add_flag("--truncated-ages", o.truncated_ages, "clip simulated ages at delta");
    app->add_option("--out", o.out, "output directory");
    app->add_option("--solver", o.solver, "rvi or structured");
    app->add_option("--mode", o.mode, "constrained or unconstrained");
}

std::string prepare_out(const RunConfig& rc)
{
    std::error_code ec;
    fs::create_directories(rc.out, ec);
    if (ec || !fs::is_directory(rc.out)) throw ParameterError(fmt::format("cannot create output directory '{}'", rc.out));
    return rc.out;
}

std::string path_in(const RunConfig& rc, const std::string& name) { return (fs::path(rc.out) / name).string(); }

std::string run_stamp(const RunConfig& rc, bool with_sim)
{
    std::string extra = fmt::format("lambda={} solver={} mode={}", rc.lambda,
                                    rc.solver == SolverKind::Rvi ? "rvi" : "structured",
                                    rc.mode == ProposedMode::Constrained ? "constrained" : "unconstrained");
    if (with_sim)
        extra += fmt::format(" seed={} horizon={} reps={} warmup={} untruncated_ages={}", rc.sim.seed, rc.sim.horizon,
                             rc.sim.replications, rc.sim.warmup, rc.sim.untruncated_ages ? "true" : "false");
    return io::stamp(rc.params, extra);
}

SolveResult solve_with(const RunConfig& rc, const ModelParams& params, double lambda)
{
    return rc.solver == SolverKind::Structured ? structured_rvi_solve(params, lambda) : rvi_solve(params, lambda);
}

std::vector<double> parse_list(const std::string& text, const char* what)
{
    std::vector<double> out;
    std::string_view rest = text;
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        std::string item(rest.substr(0, comma));
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        item.erase(0, item.find_first_not_of(' '));
        item.erase(item.find_last_not_of(' ') + 1);
        if (item.empty()) continue;
        out.push_back(parse_number<double>(what, item));
    }
    return out;
}

// --- commands ------------------------------------------------------------------

int cmd_solve(const RunConfig& rc, std::ostream& out, std::ostream& err)
{
    if (rc.mode == ProposedMode::Constrained)
        throw UsageError("solve works on the Lagrangian problem; use the cmdp command for the constrained one");
    prepare_out(rc);
    const auto solved = solve_with(rc, rc.params, rc.lambda);
    const auto stamp = run_stamp(rc, false);
    io::write_json(path_in(rc, "policy.json"), io::policy_to_json(solved.policy, rc.params, &solved.values));
    io::write_file(path_in(rc, "values.csv"), io::values_csv(solved.values, stamp));
    io::write_file(path_in(rc, "grid.csv"), io::grid_csv(solved.policy, stamp));
    fmt::print(out, "gain {} after {} iterations ({} minimizations, {} skipped)\n", solved.values.gain_estimate,
               solved.values.iterations, solved.values.minimizations, solved.values.skipped_minimizations);
    try {
        const auto summary = extract_thresholds(solved.policy);
        io::write_file(path_in(rc, "thresholds.csv"), io::thresholds_csv(summary, stamp));
        fmt::print(out, "type1 threshold eta = {}\n", summary.eta ? std::to_string(*summary.eta) : "never");
        fmt::print(out, "type2 thresholds nondecreasing in a_p: {}\n",
                   thresholds_nondecreasing(summary) ? "yes" : "no");
    } catch (const StructureError& e) {
        fmt::print(err, "structure error: {}\n", e.what());
        return 1;
    }
    return 0;
}

int cmd_cmdp(const RunConfig& rc, std::ostream& out)
{
    prepare_out(rc);
    const auto sol = solve_cmdp(rc.params);
    const auto& r = sol.report;
    io::write_json(path_in(rc, "mixture.json"), io::mixture_to_json(sol.mixture, rc.params));
    io::write_json(path_in(rc, "dual_report.json"), io::report_to_json(r, rc.params));
    io::write_file(path_in(rc, "lambda_trace.csv"), io::lambda_trace_csv(r.trace, rc.params.d, run_stamp(rc, false)));
    if (r.slack_at_zero) fmt::print(out, "constraint slack at lambda=0\n");
    fmt::print(out, "lambda in [{}, {}], alpha {}\n", r.lambda_low, r.lambda_high, r.alpha);
    fmt::print(out, "primal {} dual {} gap {}\n", r.primal_estimate, r.dual_value, r.duality_gap);
    fmt::print(out, "blended constraint {} (d = {})\n", r.blended_constraint, rc.params.d);
    return 0;
}

int cmd_simulate(const RunConfig& rc, const std::string& policy_file, bool baseline, long trace_len,
                 std::ostream& out)
{
    prepare_out(rc);
    std::optional<MixturePolicy> mixture;
    ModelParams params = rc.params;
    if (!policy_file.empty()) {
        const auto doc = io::read_json(policy_file);
        if (doc.contains("alpha")) {
            auto loaded = io::mixture_from_json(doc);
            params = loaded.params;
            mixture = std::move(loaded.mixture);
        } else {
            auto loaded = io::policy_from_json(doc);
            params = loaded.params;
            mixture = MixturePolicy{loaded.policy, loaded.policy, 1.0};
        }
    } else if (baseline) {
        const auto b = baseline_policy(params);
        mixture = MixturePolicy{b, b, 1.0};
    } else if (rc.mode == ProposedMode::Constrained) {
        mixture = solve_cmdp(params).mixture;
    } else {
        const auto solved = solve_with(rc, params, rc.lambda);
        mixture = MixturePolicy{solved.policy, solved.policy, 1.0};
    }
    RunConfig stamped = rc;
    stamped.params = params;
    const auto stamp = run_stamp(stamped, true);
    const auto metrics = simulate(*mixture, params, rc.sim);
    io::write_file(path_in(rc, "metrics.csv"), io::metrics_csv(metrics, stamp));
    fmt::print(out, "avg_cost {} +- {}\n", metrics.avg_cost.mean, metrics.avg_cost.half_width);
    fmt::print(out, "avg_constraint {} +- {}\n", metrics.avg_constraint.mean, metrics.avg_constraint.half_width);
    if (metrics.pu_nonstationary) fmt::print(out, "warning: PU age did not settle; its average grows with horizon\n");
    if (metrics.su_nonstationary) fmt::print(out, "warning: SU age did not settle; its average grows with horizon\n");
    if (trace_len > 0) {
        if (mixture->alpha != 1.0 && mixture->alpha != 0.0)
            throw UsageError("--trace needs a deterministic policy, not a randomised mixture");
        const Policy& p = mixture->alpha == 1.0 ? mixture->low : mixture->high;
        io::write_file(path_in(rc, "trace.csv"), io::trace_csv(trace(p, params, rc.sim, trace_len), stamp));
    }
    return 0;
}

int cmd_sweep(const RunConfig& rc, const std::string& p_grid, const std::string& lambda_grid, std::ostream& out)
{
    const auto ps = parse_list(p_grid, "--p-grid");
    const auto lambdas = parse_list(lambda_grid, "--lambda-grid");
    if (ps.empty() && lambdas.empty()) throw UsageError("sweep needs a non-empty --p-grid or --lambda-grid");
    prepare_out(rc);
    if (!ps.empty()) {
        std::vector<ModelParams> grid;
        for (double p : ps) {
            ModelParams params = rc.params;
            params.p = p;
            grid.push_back(params);
        }
        CompareOptions opts;
        opts.mode = rc.mode;
        opts.lambda = rc.lambda;
        opts.solver = rc.solver;
        const auto cmp = compare(grid, rc.sim, opts);
        const auto stamp = run_stamp(rc, true);
        io::write_file(path_in(rc, "comparison.csv"), io::comparison_csv(cmp, stamp));
        io::write_file(path_in(rc, "convergence.csv"), io::convergence_csv(cmp, stamp));
        for (const auto& row : cmp.rows)
            fmt::print(out, "p={} proposed {} baseline {} improvement {:.1f}%\n", row.p, row.cost_proposed.mean,
                       row.cost_baseline.mean, 100.0 * row.improvement_ratio);
    }
    if (!lambdas.empty()) {
        const auto curve = constraint_curve(rc.params, lambdas, rc.solver);
        io::write_file(path_in(rc, "constraint_curve.csv"),
                       io::lambda_trace_csv(curve, rc.params.d, run_stamp(rc, false)));
        for (const auto& cp : curve) fmt::print(out, "lambda={} constraint {}\n", cp.lambda, cp.constraint_avg);
    }
    return 0;
}

struct CheckLine {
    std::string name;
    bool passed;
    std::string detail;
};

int cmd_verify(const RunConfig& rc, const std::string& policy_file, int oracle_delta, std::ostream& out)
{
    std::vector<CheckLine> lines;
    auto add = [&lines](std::string name, bool ok, std::string detail) {
        lines.push_back({std::move(name), ok, std::move(detail)});
    };
    const double eps = rc.params.epsilon;

    if (!policy_file.empty()) {
        auto loaded = io::policy_from_json(io::read_json(policy_file));
        try {
            const auto summary = extract_thresholds(loaded.policy);
            add("policy_file_structure", true, fmt::format("eta={}", summary.eta ? std::to_string(*summary.eta) : "never"));
        } catch (const StructureError& e) {
            add("policy_file_structure", false, fmt::format("StructureError: {}", e.what()));
        }
    } else {
        // Transition kernel: mass and closure.
        {
            const CompiledModel model(rc.params);
            double worst = 0.0;
            for (std::size_t s = 0; s < model.size(); ++s) {
                for (std::size_t a = 0; a < model.n_actions(s); ++a) {
                    const auto& b = model.branch(s, a);
                    double mass = 0.0;
                    for (std::uint32_t j = 0; j < b.n_succ; ++j) mass += b.prob[j];
                    worst = std::max(worst, std::abs(mass - 1.0));
                }
            }
            add("transition_mass", worst <= 1e-12, fmt::format("max |sum - 1| = {:.2e}", worst));
        }

        const auto plain = rvi_solve(rc.params, rc.lambda);
        const auto fast = structured_rvi_solve(rc.params, rc.lambda);
        double vdiff = 0.0;
        for (std::size_t i = 0; i < plain.values.values.size(); ++i)
            vdiff = std::max(vdiff, std::abs(plain.values.values[i] - fast.values.values[i]));
        add("structured_matches_rvi", plain.policy.actions == fast.policy.actions && vdiff <= 2 * eps,
            fmt::format("max value gap {:.2e}, skipped {}", vdiff, fast.values.skipped_minimizations));

        const double residual = bellman_residual(CompiledModel(rc.params), rc.lambda, plain.values);
        add("bellman_residual", residual <= 2 * eps, fmt::format("{:.2e}", residual));

        try {
            const auto summary = extract_thresholds(plain.policy);
            add("threshold_structure", true, fmt::format("eta={}", summary.eta ? std::to_string(*summary.eta) : "never"));
            add("type2_thresholds_nondecreasing", thresholds_nondecreasing(summary), "in a_p");
        } catch (const StructureError& e) {
            add("threshold_structure", false, e.what());
        }

        for (const auto& c : verify_value_structure(plain.values, rc.params).checks)
            add(c.name, c.passed, fmt::format("worst {:.2e} (tol {:.2e}) {}", c.worst, c.tolerance, c.witness));

        if (oracle_delta > 0) {
            // Exhaustive enumeration is only affordable up to δ = 3; the
            // linear program covers the requested size.
            ModelParams small = rc.params;
            small.delta = std::min(oracle_delta, 3);
            const auto solved = rvi_solve(small, rc.lambda);
            const double mine = oracle::average_cost(solved.policy, small, oracle::lagrangian(small, rc.lambda));
            const auto bf = oracle::brute_force_optimum(small, rc.lambda);
            add("brute_force_oracle", mine <= bf.best_gain + 1e-9,
                fmt::format("delta={} rvi {} best {} over {} policies", small.delta, mine, bf.best_gain, bf.policies));

            small.delta = oracle_delta;
            const auto at_delta = rvi_solve(small, rc.lambda);
            const double gain = oracle::average_cost(at_delta.policy, small, oracle::lagrangian(small, rc.lambda));
            const double lp = oracle::lp_optimal_gain(small, rc.lambda);
            add("lp_oracle", std::abs(gain - lp) <= 1e-9, fmt::format("delta={} rvi {} lp {}", oracle_delta, gain, lp));
        }
    }

    bool all = true;
    for (const auto& l : lines) {
        all = all && l.passed;
        fmt::print(out, "{} {} {}\n", l.passed ? "PASS" : "FAIL", l.name, l.detail);
    }
    return all ? 0 : 1;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Age-of-information CMDP toolkit for a primary/secondary user pair"};
    app.require_subcommand(1);

    Overrides o;
    std::string policy_file;
    bool baseline = false;
    long trace_len = 0;
    std::string p_grid;
    std::string lambda_grid;
    int oracle_delta = 4;

    auto* solve = app.add_subcommand("solve", "solve the Lagrangian MDP and export policy, values and thresholds");
    auto* cmdp = app.add_subcommand("cmdp", "solve the constrained problem and build the randomised mixture");
    auto* sim = app.add_subcommand("simulate", "Monte Carlo evaluation of a policy");
    auto* sweep = app.add_subcommand("sweep", "compare against the baseline over p, or trace the constraint over lambda");
    auto* verify = app.add_subcommand("verify", "run the structural and oracle checks");
    for (auto* sub : {solve, cmdp, sim, sweep, verify}) add_common(sub, o);
    sim->add_option("--policy", policy_file, "policy or mixture JSON to simulate");
    sim->add_flag("--baseline", baseline, "simulate the baseline policy");
    sim->add_option("--trace", trace_len, "also write a slot-by-slot trace of this many slots");
    sweep->add_option("--p-grid", p_grid, "comma-separated arrival probabilities");
    sweep->add_option("--lambda-grid", lambda_grid, "comma-separated multipliers");
    verify->add_option("--policy", policy_file, "check the structure of a stored policy instead");
    verify->add_option("--oracle-delta", oracle_delta, "truncation for the brute-force oracle (0 disables)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            fmt::print(out, "{}", app.help());
            return 0;
        }
        fmt::print(err, "{}\n", e.what());
        return 2;
    }

    try {
        const RunConfig rc = resolve(o);
        if (*solve) return cmd_solve(rc, out, err);
        if (*cmdp) return cmd_cmdp(rc, out);
        if (*sim) return cmd_simulate(rc, policy_file, baseline, trace_len, out);
        if (*sweep) return cmd_sweep(rc, p_grid, lambda_grid, out);
        if (*verify) return cmd_verify(rc, policy_file, oracle_delta, out);
    } catch (const UsageError& e) {
        fmt::print(err, "usage error: {}\n", e.what());
        return 2;
    } catch (const StructureError& e) {
        fmt::print(err, "structure error: {}\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        fmt::print(err, "error: {}\n", e.what());
        return 1;
    }
    return 2;
}

}  // namespace aoi::cli
