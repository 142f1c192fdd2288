#pragma once

#include "staggercast/demand_model.hpp"
#include "staggercast/network_sim.hpp"
#include "staggercast/policy_engine.hpp"
#include "staggercast/user_agents.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace staggercast {

struct ForcedDeferralSpec {
    DayWindow peak_window{18 * 3600.0, 23 * 3600.0};
    double fraction = 0.05;
};

/// Everything one simulation needs. Each section may be inline or a path
/// relative to the scenario file.
struct Scenario {
    std::optional<WorkloadConfig> workload;
    std::optional<std::filesystem::path> trace;
    PopulationSpec population;
    RuleSet ruleset;
    NetConfig network;
    std::uint64_t seed = 0;
    bool dsm_enabled = true;
    std::optional<ForcedDeferralSpec> forced_deferral;
    /// Trace mode only; synthetic workloads carry their own.
    double horizon_s = kSecondsPerDay;
    double clock_offset_s = 0.0;
    /// Files read while loading, scenario first.
    std::vector<std::filesystem::path> sources;
};

/// Throws ConfigError. Paths inside referenced files read `<file>:<json path>`.
Scenario load_scenario(const std::filesystem::path& file);
Scenario parse_scenario(const Json& doc, const std::filesystem::path& base_dir);
/// Cross-checks between sections; throws ConfigError.
void cross_validate(const Scenario& scenario);

struct ScenarioInputs {
    std::vector<Request> workload;
    std::vector<UserProfile> population;
    double horizon_s = kSecondsPerDay;
    double clock_offset_s = 0.0;
};

/// Workload (synthetic or trace) and population for one base seed.
ScenarioInputs materialize(const Scenario& scenario, std::uint64_t seed);

/// Runs the scenario; `dsm_enabled` overrides the scenario flag (baseline runs).
SimReport run_scenario(const Scenario& scenario, const ScenarioInputs& inputs, std::uint64_t seed, bool dsm_enabled);

/// Window options the forced-deferral planner and simulator share.
OfferOptions deferral_window(const Scenario& scenario, const ScenarioInputs& inputs);

}  // namespace staggercast
