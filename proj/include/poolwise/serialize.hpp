#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "poolwise/core.hpp"
#include "poolwise/evaluation.hpp"
#include "poolwise/inference.hpp"

namespace poolwise {

using Json = nlohmann::ordered_json;

// Instance file: {"agents": [{"id", "u", "p"}...], "B", "G", "meta"?}
Json to_json(const Instance& instance);
Instance instance_from_json(const Json& j);

// Plan file: recursive {"pool": [ids], "neg": node|null, "pos": node|null};
// an empty plan is null. Negative branch is emitted first.
Json to_json(const DynamicPlan& plan);
DynamicPlan plan_from_json(const Json& j);

// History file: [{"pool": [ids], "result": "neg"|"pos"}...]
Json to_json(const History& history);
History history_from_json(const Json& j);

Json to_json(const Pool& pool);
Pool pool_from_json(const Json& j);
Outcome outcome_from_string(const std::string& s);

Json to_json(const BeliefState& belief);
Json to_json(const EvalReport& report);

// Missing fields keep the values already in `config`.
Json to_json(const GibbsConfig& config);
void update_from_json(GibbsConfig& config, const Json& j);
void update_from_json(MonteCarloConfig& config, const Json& j);

Json read_json_file(const std::filesystem::path& path);
// Writes `j` pretty-printed (indent 2) with a trailing newline.
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace poolwise
