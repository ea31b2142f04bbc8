#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "aoi/cmdp.hpp"
#include "aoi/model.hpp"
#include "aoi/policy.hpp"
#include "aoi/simulator.hpp"
#include "aoi/solver.hpp"

namespace aoi::io {

using nlohmann::json;

inline constexpr int kFormatVersion = 1;

json params_to_json(const ModelParams& params);
ModelParams params_from_json(const json& j);

/// {"version", "params", "lambda", "states": [[a_p,a_s,lam_p,lam_s,action,value], …]}.
/// Values are null when no table is given.
json policy_to_json(const Policy& policy, const ModelParams& params, const ValueTable* values = nullptr);

struct LoadedPolicy {
    ModelParams params;
    Policy policy;
    std::vector<double> values;  ///< empty if the document carries none
};

/// Throws ParameterError on malformed documents and ContractError when an
/// entry assigns an unavailable action.
LoadedPolicy policy_from_json(const json& j);

json mixture_to_json(const MixturePolicy& mixture, const ModelParams& params);

struct LoadedMixture {
    ModelParams params;
    MixturePolicy mixture;
};
LoadedMixture mixture_from_json(const json& j);

json report_to_json(const DualSolveReport& report, const ModelParams& params);

// CSV documents. Each starts with a '#' line recording the parameters, then a
// header row.
std::string stamp(const ModelParams& params, const std::string& extra = {});
std::string thresholds_csv(const ThresholdSummary& summary, const std::string& stamp_line);
std::string values_csv(const ValueTable& values, const std::string& stamp_line);
std::string grid_csv(const Policy& policy, const std::string& stamp_line);
std::string lambda_trace_csv(const std::vector<CurvePoint>& trace, double d, const std::string& stamp_line);
std::string metrics_csv(const Metrics& metrics, const std::string& stamp_line);
std::string trace_csv(const std::vector<TraceRecord>& records, const std::string& stamp_line);
std::string comparison_csv(const Comparison& cmp, const std::string& stamp_line);
std::string convergence_csv(const Comparison& cmp, const std::string& stamp_line);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);
json read_json(const std::string& path);
void write_json(const std::string& path, const json& j);

}  // namespace aoi::io
