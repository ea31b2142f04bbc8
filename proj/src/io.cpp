#include "aoi/io.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace aoi::io {

json params_to_json(const ModelParams& params)
{
    return json{{"p", params.p},
                {"k", params.k},
                {"c_e", params.c_e},
                {"d", params.d},
                {"delta", params.delta},
                {"epsilon", params.epsilon},
                {"charge_relay_energy", params.charge_relay_energy}};
}

ModelParams params_from_json(const json& j)
{
    try {
        ModelParams p;
        p.p = j.at("p").get<double>();
        p.k = j.at("k").get<double>();
        p.c_e = j.at("c_e").get<double>();
        p.d = j.at("d").get<double>();
        p.delta = j.at("delta").get<int>();
        p.epsilon = j.at("epsilon").get<double>();
        p.charge_relay_energy = j.value("charge_relay_energy", false);
        p.validate();
        return p;
    } catch (const json::exception& e) {
        throw ParameterError(fmt::format("malformed params block: {}", e.what()));
    }
}

namespace {

void check_version(const json& j)
{
    if (!j.is_object() || j.value("version", -1) != kFormatVersion)
        throw ParameterError(fmt::format("unsupported document version (expected {})", kFormatVersion));
}

const json& field(const json& j, const char* key)
{
    const auto it = j.find(key);
    if (it == j.end()) throw ParameterError(fmt::format("document has no '{}' field", key));
    return *it;
}

}  // namespace

json policy_to_json(const Policy& policy, const ModelParams& params, const ValueTable* values)
{
    const StateSpace space(policy.delta);
    json states = json::array();
    for (std::size_t i = 0; i < policy.actions.size(); ++i) {
        const auto s = space.state(i);
        json value = values ? json(values->values.at(i)) : json(nullptr);
        states.push_back(json::array({s.a_p, s.a_s, int(s.lam_p), int(s.lam_s), to_string(policy.actions[i]), value}));
    }
    json doc{{"version", kFormatVersion}, {"params", params_to_json(params)}, {"lambda", policy.lambda}};
    if (values) {
        doc["reference_state"] = json::array(
            {values->reference.a_p, values->reference.a_s, int(values->reference.lam_p), int(values->reference.lam_s)});
        doc["gain"] = values->gain_estimate;
        doc["iterations"] = values->iterations;
        doc["converged"] = values->converged;
    }
    doc["states"] = std::move(states);
    return doc;
}

LoadedPolicy policy_from_json(const json& j)
{
    check_version(j);
    LoadedPolicy out;
    out.params = params_from_json(field(j, "params"));
    const StateSpace space(out.params.delta);
    out.policy.delta = out.params.delta;
    out.policy.lambda = j.value("lambda", 0.0);
    out.policy.actions.assign(space.size(), Action::Silent);
    std::vector<char> seen(space.size(), 0);
    bool has_values = true;
    std::vector<double> values(space.size(), 0.0);
    try {
        for (const auto& row : field(j, "states")) {
            if (!row.is_array() || row.size() != 6) throw ParameterError("policy rows must have 6 fields");
            const SystemState s{row[0].get<int>(), row[1].get<int>(), row[2].get<int>() != 0, row[3].get<int>() != 0};
            if (!space.contains(s)) throw ParameterError(fmt::format("state {} outside the space", to_string(s)));
            const auto i = space.index(s);
            if (seen[i]) throw ParameterError(fmt::format("duplicate entry for {}", to_string(s)));
            seen[i] = 1;
            const Action a = action_from_string(row[4].get<std::string>());
            if (!is_available(s, a))
                throw ContractError(fmt::format("policy assigns {} to {}", to_string(a), to_string(s)));
            out.policy.actions[i] = a;
            if (row[5].is_number()) {
                values[i] = row[5].get<double>();
            } else {
                has_values = false;
            }
        }
    } catch (const json::exception& e) {
        throw ParameterError(fmt::format("malformed policy document: {}", e.what()));
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i]) throw ParameterError(fmt::format("policy misses state {}", to_string(space.state(i))));
    if (has_values) out.values = std::move(values);
    return out;
}

json mixture_to_json(const MixturePolicy& mixture, const ModelParams& params)
{
    return json{{"version", kFormatVersion},
                {"params", params_to_json(params)},
                {"alpha", mixture.alpha},
                {"low", policy_to_json(mixture.low, params)},
                {"high", policy_to_json(mixture.high, params)}};
}

LoadedMixture mixture_from_json(const json& j)
{
    check_version(j);
    LoadedMixture out;
    out.params = params_from_json(field(j, "params"));
    out.mixture.low = policy_from_json(field(j, "low")).policy;
    out.mixture.high = policy_from_json(field(j, "high")).policy;
    const auto& alpha = field(j, "alpha");
    if (!alpha.is_number()) throw ParameterError("mixture alpha must be a number");
    out.mixture.alpha = alpha.get<double>();
    out.mixture.validate();
    return out;
}

json report_to_json(const DualSolveReport& r, const ModelParams& params)
{
    json trace = json::array();
    for (const auto& cp : r.trace)
        trace.push_back(json{{"lambda", cp.lambda},
                             {"gain", cp.gain},
                             {"constraint_avg", cp.constraint_avg},
                             {"objective_avg", cp.objective_avg},
                             {"dual_value", cp.dual_value(params.d)}});
    return json{{"version", kFormatVersion},
                {"params", params_to_json(params)},
                {"lambda_star", r.lambda_star},
                {"lambda_low", r.lambda_low},
                {"lambda_high", r.lambda_high},
                {"alpha", r.alpha},
                {"primal_estimate", r.primal_estimate},
                {"blended_constraint", r.blended_constraint},
                {"dual_value", r.dual_value},
                {"duality_gap", r.duality_gap},
                {"constraint_slack_at_zero", r.slack_at_zero},
                {"trace", std::move(trace)}};
}

// --- CSV -------------------------------------------------------------------------

std::string stamp(const ModelParams& params, const std::string& extra)
{
    std::string line = fmt::format("# p={} k={} c_e={} d={} delta={} epsilon={} charge_relay_energy={}", params.p,
                                   params.k, params.c_e, params.d, params.delta, params.epsilon,
                                   params.charge_relay_energy ? "true" : "false");
    if (!extra.empty()) line += " " + extra;
    return line + "\n";
}

namespace {

std::string opt_int(const std::optional<int>& v) { return v ? std::to_string(*v) : std::string("never"); }

std::string est(const Estimate& e) { return fmt::format("{},{}", e.mean, e.half_width); }

}  // namespace

std::string thresholds_csv(const ThresholdSummary& summary, const std::string& stamp_line)
{
    std::string out = stamp_line + "state_type,a_p,threshold\n";
    out += fmt::format("type1,all,{}\n", opt_int(summary.eta));
    for (std::size_t i = 0; i < summary.type2_thresholds.size(); ++i)
        out += fmt::format("type2,{},{}\n", i + 1, opt_int(summary.type2_thresholds[i]));
    return out;
}

std::string values_csv(const ValueTable& values, const std::string& stamp_line)
{
    const StateSpace space(values.delta);
    std::string out = stamp_line + "a_p,a_s,lam_p,lam_s,value\n";
    for (std::size_t i = 0; i < values.values.size(); ++i) {
        const auto s = space.state(i);
        out += fmt::format("{},{},{},{},{}\n", s.a_p, s.a_s, int(s.lam_p), int(s.lam_s), values.values[i]);
    }
    return out;
}

std::string grid_csv(const Policy& policy, const std::string& stamp_line)
{
    const StateSpace space(policy.delta);
    std::string out = stamp_line + "a_p,a_s,state_type,action\n";
    for (std::size_t i = 0; i < policy.actions.size(); ++i) {
        const auto s = space.state(i);
        if (s.lam_s) continue;
        out += fmt::format("{},{},{},{}\n", s.a_p, s.a_s, to_string(classify(s)), to_string(policy.actions[i]));
    }
    return out;
}

std::string lambda_trace_csv(const std::vector<CurvePoint>& trace, double d, const std::string& stamp_line)
{
    std::string out = stamp_line + "lambda,gain,constraint_avg,dual_value\n";
    for (const auto& cp : trace) out += fmt::format("{},{},{},{}\n", cp.lambda, cp.gain, cp.constraint_avg, cp.dual_value(d));
    return out;
}

std::string metrics_csv(const Metrics& m, const std::string& stamp_line)
{
    std::string out = stamp_line + "metric,mean,half_width,nonstationary\n";
    out += fmt::format("avg_cost,{},0\n", est(m.avg_cost));
    out += fmt::format("avg_aoi_su,{},{}\n", est(m.avg_aoi_su), int(m.su_nonstationary));
    out += fmt::format("avg_aoi_pu,{},{}\n", est(m.avg_aoi_pu), int(m.pu_nonstationary));
    out += fmt::format("avg_energy,{},0\n", est(m.avg_energy));
    out += fmt::format("avg_constraint,{},0\n", est(m.avg_constraint));
    return out;
}

std::string trace_csv(const std::vector<TraceRecord>& records, const std::string& stamp_line)
{
    std::string out = stamp_line + "t,a_p,a_s,lam_p,lam_s,action,cost,charge\n";
    for (const auto& r : records)
        out += fmt::format("{},{},{},{},{},{},{},{}\n", r.t, r.state.a_p, r.state.a_s, int(r.state.lam_p),
                           int(r.state.lam_s), to_string(r.action), r.cost, r.charge);
    return out;
}

std::string comparison_csv(const Comparison& cmp, const std::string& stamp_line)
{
    std::string out = stamp_line +
                      "p,lambda,cost_proposed,cost_proposed_hw,cost_baseline,cost_baseline_hw,difference,"
                      "difference_hw,constraint_proposed,constraint_proposed_hw,improvement_ratio\n";
    for (const auto& r : cmp.rows)
        out += fmt::format("{},{},{},{},{},{},{}\n", r.p, r.lambda, est(r.cost_proposed), est(r.cost_baseline),
                           est(r.difference), est(r.constraint_proposed), r.improvement_ratio);
    return out;
}

std::string convergence_csv(const Comparison& cmp, const std::string& stamp_line)
{
    std::string out = stamp_line + "p,slot,proposed_running_cost,baseline_running_cost\n";
    for (const auto& c : cmp.convergence) out += fmt::format("{},{},{},{}\n", c.p, c.slot, c.proposed, c.baseline);
    return out;
}

// --- files -------------------------------------------------------------------------

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParameterError(fmt::format("cannot open '{}'", path));
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParameterError(fmt::format("cannot write '{}'", path));
    out << content;
    if (!out) throw ParameterError(fmt::format("failed writing '{}'", path));
}

json read_json(const std::string& path)
{
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ParameterError(fmt::format("'{}' is not valid JSON: {}", path, e.what()));
    }
}

void write_json(const std::string& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

}  // namespace aoi::io
