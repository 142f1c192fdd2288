#pragma once

#include <staggercast/network_sim.hpp>

#include <vector>

namespace fixtures {

using namespace staggercast;

inline Request req(RequestId id, double t, UserId user, AppClass app, std::string content, std::uint64_t size,
                   Genre genre = Genre::Movie) {
    Request r;
    r.request_id = id;
    r.arrival_s = t;
    r.user_id = user;
    r.app = app;
    r.content_id = std::move(content);
    r.size_bytes = size;
    r.genre = genre;
    r.live = app == AppClass::LiveVideo;
    return r;
}

inline std::vector<UserProfile> eager_users(std::size_t n) {
    std::vector<UserProfile> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& p = out[i];
        p.user_id = i;
        p.timeshift_propensity = Propensity::Often;
        p.content_shift_propensity = Propensity::Often;
        for (auto app : all_values<AppClass>()) p.per_app_over3h_willingness[app] = 1.0;
        for (auto k : all_values<IncentiveKind>()) p.incentive_weight[k] = 1.0;
    }
    return out;
}

inline Rule stage_shiftable() {
    Rule r;
    r.match.app_classes = {AppClass::VideoOnDemand, AppClass::LiveVideo, AppClass::BulkSync, AppClass::P2P};
    r.match.min_size_bytes = 100'000'000;
    r.match.exclude_live = true;
    r.per_user_daily_prompt_cap = 1'000'000;
    r.strategy = Strategy::Stage;
    r.offer_template = {IncentiveKind::LoyaltyCredits, 5, 300};
    return r;
}

// Workload plus matching population, small enough for exhaustive checks.
struct SmallWorld {
    std::vector<Request> workload;
    std::vector<UserProfile> population;
    WorkloadConfig config;
};

inline SmallWorld small_world(std::uint64_t seed, std::uint64_t users = 60, double rate_scale = 1.0) {
    SmallWorld w;
    w.config = default_workload_config();
    w.config.population_size = users;
    w.config.seed = seed;
    for (auto app : all_values<AppClass>()) {
        if (w.config.apps[app]) w.config.apps[app]->mean_rate_per_user_per_day *= rate_scale;
    }
    w.workload = generate_workload(w.config);
    w.population = sample_population(PopulationSpec{}, users, seed);
    return w;
}

}  // namespace fixtures
