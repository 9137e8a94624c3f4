#pragma once

#include <nlohmann/json.hpp>

#include "perpsieve/audit.hpp"
#include "perpsieve/costs.hpp"
#include "perpsieve/diagnostics.hpp"
#include "perpsieve/marketdata.hpp"
#include "perpsieve/screening.hpp"
#include "perpsieve/signal.hpp"
#include "perpsieve/tuner.hpp"

// JSON mapping of the domain types. Parsers reject unknown keys and
// out-of-bounds values with Error(InvalidArgument); omitted keys keep defaults.
namespace perpsieve {

using Json = nlohmann::json;

Json to_json(const StrategyParams& p);
StrategyParams params_from_json(const Json& j);

Json to_json(const CostProfile& p);
CostProfile profile_from_json(const Json& j);

Json to_json(const WindowSpec& w);
WindowSpec window_from_json(const Json& j);

Json to_json(const StablePolicy& p);
StablePolicy policy_from_json(const Json& j);

Json to_json(const DdBucketPolicy& p);
DdBucketPolicy dd_policy_from_json(const Json& j);

Json to_json(const GuardConfig& c);
GuardConfig guard_config_from_json(const Json& j);

Json to_json(const TpeSettings& t);
TpeSettings tpe_from_json(const Json& j);

SyntheticFundingSettings funding_settings_from_json(const Json& j);
SyntheticBarSettings bar_settings_from_json(const Json& j);

Json to_json(const ValidationReport& r);
Json to_json(const MetricsSummary& m);
Json to_json(const AuditReport& r);
Json to_json(const PboResult& r);
Json to_json(const BootstrapResult& r);
Json to_json(const UpliftReport& r);

/// Compact dump with sorted keys; the byte string every digest is taken over.
std::string canonical_dump(const Json& j);

std::string digest_of(const Json& j);

}  // namespace perpsieve
