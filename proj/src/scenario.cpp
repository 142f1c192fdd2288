#include "staggercast/scenario.hpp"

#include "staggercast/errors.hpp"
#include "staggercast/random.hpp"

#include <algorithm>

namespace staggercast {

namespace {

// Stream labels for derive_seed.
constexpr std::uint64_t kWorkloadStream = 1;
constexpr std::uint64_t kPopulationStream = 2;
constexpr std::uint64_t kSimStream = 3;

/// Parses an inline section or the file it names, re-rooting error paths.
template <class F>
auto section(const Json& value, const std::string& path, const std::filesystem::path& base_dir,
             std::vector<std::filesystem::path>& sources, F parse) {
    if (value.is_string()) {
        const auto file = base_dir / value.get<std::string>();
        sources.push_back(file);
        const Json doc = read_json_file(file);
        try {
            return parse(doc);
        } catch (const ConfigError& e) {
            std::string message = e.what();
            if (!e.path().empty()) message.erase(0, e.path().size() + 2);
            throw ConfigError(file.string() + ":" + (e.path().empty() ? "/" : e.path()), message);
        }
    }
    try {
        return parse(value);
    } catch (const ConfigError& e) {
        std::string message = e.what();
        if (!e.path().empty()) message.erase(0, e.path().size() + 2);
        throw ConfigError(path + e.path(), message);
    }
}

}  // namespace

Scenario parse_scenario(const Json& doc, const std::filesystem::path& base_dir) {
    JsonObject obj(doc, "");
    Scenario s;
    const Json* workload = obj.optional("workload");
    const Json* trace = obj.optional("trace");
    if ((workload == nullptr) == (trace == nullptr)) {
        throw ConfigError("/workload", "exactly one of workload or trace is required");
    }
    if (workload) {
        s.workload = section(*workload, obj.child("workload"), base_dir, s.sources,
                             [](const Json& j) { return parse_workload_config(j); });
    } else {
        s.trace = base_dir / as_string(*trace, obj.child("trace"));
    }
    if (const Json* v = obj.optional("population")) {
        s.population = section(*v, obj.child("population"), base_dir, s.sources,
                               [](const Json& j) { return parse_population_spec(j); });
    }
    if (const Json* v = obj.optional("ruleset")) {
        s.ruleset = section(*v, obj.child("ruleset"), base_dir, s.sources, [](const Json& j) { return parse_ruleset(j); });
    }
    if (const Json* v = obj.optional("network")) {
        s.network = section(*v, obj.child("network"), base_dir, s.sources, [](const Json& j) { return parse_net_config(j); });
    }
    if (const Json* v = obj.optional("seed")) s.seed = as_uint(*v, obj.child("seed"));
    if (const Json* v = obj.optional("dsm_enabled")) s.dsm_enabled = as_bool(*v, obj.child("dsm_enabled"));
    if (const Json* v = obj.optional("forced_deferral")) {
        JsonObject fd(*v, obj.child("forced_deferral"));
        ForcedDeferralSpec spec;
        spec.peak_window = as_window(fd.required("peak_window"), fd.child("peak_window"));
        spec.fraction = as_probability(fd.required("fraction"), fd.child("fraction"));
        fd.finish();
        s.forced_deferral = spec;
    }
    const Json* horizon = obj.optional("horizon_s");
    const Json* offset = obj.optional("clock_offset_s");
    if (s.workload) {
        if (horizon) throw ConfigError(obj.child("horizon_s"), "set horizon_s in the workload config");
        if (offset) throw ConfigError(obj.child("clock_offset_s"), "set clock_offset_s in the workload config");
        s.horizon_s = s.workload->horizon_s;
        s.clock_offset_s = s.workload->clock_offset_s;
    } else {
        if (horizon) s.horizon_s = as_number(*horizon, obj.child("horizon_s"));
        if (offset) s.clock_offset_s = as_number(*offset, obj.child("clock_offset_s"));
        if (!(s.horizon_s > 0.0)) throw ConfigError(obj.child("horizon_s"), "must be > 0");
    }
    obj.finish();
    cross_validate(s);
    return s;
}

Scenario load_scenario(const std::filesystem::path& file) {
    const Json doc = read_json_file(file);
    Scenario s;
    try {
        s = parse_scenario(doc, file.parent_path());
    } catch (const ConfigError& e) {
        // Errors already rooted in a referenced file keep their prefix.
        if (!e.path().empty() && e.path().front() != '/') throw;
        std::string message = e.what();
        if (!e.path().empty()) message.erase(0, e.path().size() + 2);
        throw ConfigError(file.string() + ":" + (e.path().empty() ? "/" : e.path()), message);
    }
    s.sources.insert(s.sources.begin(), file);
    return s;
}

void cross_validate(const Scenario& s) {
    if (!s.workload) return;
    const auto& w = *s.workload;
    if (w.bin_s != s.network.bin_s) {
        throw ConfigError("/network/bin_s", "differs from the workload bin_s " + format_double(w.bin_s));
    }
    for (std::size_t i = 0; i < s.ruleset.size(); ++i) {
        std::size_t j = 0;
        for (AppClass app : all_values<AppClass>()) {
            if (!s.ruleset[i].match.app_classes.contains(app)) continue;
            if (!w.apps[app]) {
                throw ConfigError("/ruleset/" + std::to_string(i) + "/match/app_classes/" + std::to_string(j),
                                  "app class " + std::string(to_string(app)) + " has no workload");
            }
            ++j;
        }
    }
}

ScenarioInputs materialize(const Scenario& s, std::uint64_t seed) {
    ScenarioInputs in;
    std::size_t users = 0;
    if (s.workload) {
        auto w = *s.workload;
        w.seed = derive_seed(seed, {kWorkloadStream});
        in.workload = generate_workload(w);
        users = w.population_size;
    } else {
        in.workload = load_trace(*s.trace);
        for (const auto& r : in.workload) users = std::max<std::size_t>(users, r.user_id + 1);
    }
    in.population = sample_population(s.population, users, derive_seed(seed, {kPopulationStream}));
    in.horizon_s = s.horizon_s;
    in.clock_offset_s = s.clock_offset_s;
    return in;
}

OfferOptions deferral_window(const Scenario& s, const ScenarioInputs& in) {
    OfferOptions o;
    o.off_peak_window = s.network.off_peak_window;
    o.clock_offset_s = in.clock_offset_s;
    o.latest_access_s = in.horizon_s;
    return o;
}

SimReport run_scenario(const Scenario& s, const ScenarioInputs& in, std::uint64_t seed, bool dsm_enabled) {
    SimInput input;
    input.workload = in.workload;
    input.population = in.population;
    input.acceptance = s.population.acceptance;
    input.ruleset = s.ruleset;
    input.net = s.network;
    input.seed = derive_seed(seed, {kSimStream});
    input.horizon_s = in.horizon_s;
    input.clock_offset_s = in.clock_offset_s;
    SimOptions options;
    options.dsm_enabled = dsm_enabled;
    if (dsm_enabled && s.forced_deferral) {
        const auto plan = plan_forced_deferral(in.workload, s.forced_deferral->peak_window, s.forced_deferral->fraction,
                                               deferral_window(s, in), s.network.bin_s);
        options.choice_override = plan.as_override();
    }
    return run(input, options);
}

}  // namespace staggercast
