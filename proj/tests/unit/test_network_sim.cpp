#include <doctest.h>

#include "../oracles/first_fit.hpp"
#include "../oracles/reference_lru.hpp"
#include "../oracles/replay.hpp"
#include "sim_fixtures.hpp"

#include <staggercast/errors.hpp>

#include <numeric>
#include <sstream>

using namespace staggercast;
using namespace fixtures;

namespace {

NetConfig tiny_net() {
    NetConfig n;
    n.capacity_bytes_per_bin[Resource::Transit] = 1'000'000'000'000ULL;
    n.capacity_bytes_per_bin[Resource::Aggregation] = 1'000'000'000'000ULL;
    return n;
}

SimInput input_for(std::span<const Request> w, std::span<const UserProfile> pop, std::span<const Rule> rules,
                   NetConfig net = tiny_net()) {
    SimInput in;
    in.workload = w;
    in.population = pop;
    in.ruleset = rules;
    in.net = net;
    in.horizon_s = kSecondsPerDay;
    return in;
}

ChoiceOverride always(UserChoice c) {
    return [c](const Request&) -> std::optional<UserChoice> { return c; };
}

std::string csv_of(const SimReport& r) {
    std::ostringstream out;
    write_series_csv(out, r);
    return out.str();
}

void check_invariants(const SimReport& r, const SimInput& in) {
    const auto& s = r.summary;
    std::uint64_t total = 0;
    for (auto d : all_values<Disposition>()) total += s.dispositions[d];
    CHECK(total == in.workload.size());
    CHECK(r.dispositions.size() == in.workload.size());
    CHECK(s.transit_bytes + s.cache_served_bytes + s.home_served_bytes == s.delivered_bytes);
    for (auto res : all_values<Resource>()) {
        const auto& b = r.series[res];
        const auto cap = in.net.capacity_bytes_per_bin[res];
        for (std::size_t i = 0; i < r.bins; ++i) CHECK(b.served[i] + b.prefetch[i] <= cap);
        const auto offered = std::accumulate(b.offered.begin(), b.offered.end(), std::uint64_t{0});
        const auto served = std::accumulate(b.served.begin(), b.served.end(), std::uint64_t{0});
        CHECK(served + s.resources[res].backlog_bytes == offered);
    }
}

}  // namespace

TEST_CASE("peak_to_mean") {
    const std::vector<double> flat{3, 3, 3};
    CHECK(peak_to_mean(flat) == 1.0);
    const std::vector<double> spike{0, 10, 0, 0};
    CHECK(peak_to_mean(spike) == 4.0);
    const std::vector<double> zero{0, 0};
    CHECK_THROWS_AS(peak_to_mean(zero), PreconditionError);
    CHECK_THROWS_AS(peak_to_mean(std::span<const double>{}), PreconditionError);
    const std::vector<double> neg{1, -1};
    CHECK_THROWS_AS(peak_to_mean(neg), PreconditionError);
}

TEST_CASE("nearest-rank percentile") {
    std::vector<double> v(100);
    std::iota(v.begin(), v.end(), 1.0);
    CHECK(percentile(v, 0.95) == 95);
    CHECK(percentile(v, 1.0) == 100);
    CHECK(percentile(v, 0.001) == 1);
}

TEST_CASE("prefetch into an empty off-peak window starts at the 02:00 bin") {
    PrefetchPlanner p(288, 300, 1000);
    const auto start = p.schedule(600, {7200, 21600}, 30000);
    REQUIRE(start);
    CHECK(*start == 7200);
    CHECK(p.remaining(24) == 400);
}

TEST_CASE("exhausted window yields no prefetch slot") {
    PrefetchPlanner p(288, 300, 1000);
    for (std::size_t i = 0; i < 48; ++i) REQUIRE(p.schedule(1000, {7200, 21600}, 30000));
    CHECK_FALSE(p.schedule(1, {7200, 21600}, 30000));
    // Deadline before the first bin ends.
    PrefetchPlanner q(288, 300, 1000);
    CHECK_FALSE(q.schedule(1, {7200, 21600}, 7300));
}

TEST_CASE("prefetch packing equals a greedy first-fit oracle") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const std::uint64_t budget = 300;
        PrefetchPlanner planner(40, 300, budget);
        std::vector<oracle::PackJob> jobs;
        std::vector<std::optional<double>> got;
        for (int i = 0; i < 10; ++i) {
            const std::uint64_t size = 50 + static_cast<std::uint64_t>(uniform01(rng) * 250);
            const double begin = 300.0 * static_cast<int>(uniform01(rng) * 10) + (uniform01(rng) < 0.5 ? 0 : 120);
            const double end = begin + 300.0 * (1 + static_cast<int>(uniform01(rng) * 5));
            const double deadline = end + uniform01(rng) * 600;
            jobs.push_back({size, begin, end, deadline});
            got.push_back(planner.schedule(size, {begin, end}, deadline));
        }
        const auto expected = oracle::first_fit(jobs, 40, 300, budget);
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            REQUIRE(got[i].has_value() == expected[i].has_value());
            if (got[i]) CHECK(*got[i] == std::max(300.0 * static_cast<double>(*expected[i]), jobs[i].window_begin));
        }
    }
}

TEST_CASE("pass-through request uses transit and aggregation") {
    std::vector<Request> w{req(0, 100, 0, AppClass::Email, "e/1", 1000)};
    const auto pop = eager_users(1);
    const auto in = input_for(w, pop, {});
    const auto r = run(in);
    CHECK(r.series[Resource::Transit].offered[0] == 1000);
    CHECK(r.series[Resource::Aggregation].served[0] == 1000);
    CHECK(r.dispositions[0].second == Disposition::ServedOriginal);
    CHECK(r.bins == 288);
    check_invariants(r, in);
}

TEST_CASE("over-capacity demand queues into later bins") {
    std::vector<Request> w{req(0, 10, 0, AppClass::Email, "e/1", 250)};
    const auto pop = eager_users(1);
    NetConfig net;
    net.capacity_bytes_per_bin[Resource::Transit] = 100;
    net.capacity_bytes_per_bin[Resource::Aggregation] = 1000;
    auto in = input_for(w, pop, {}, net);
    const auto r = run(in);
    const auto& t = r.series[Resource::Transit];
    CHECK(t.served[0] == 100);
    CHECK(t.served[1] == 100);
    CHECK(t.served[2] == 50);
    CHECK(t.utilization[0] == 1.0);
    CHECK(r.summary.resources[Resource::Transit].backlog_bytes == 0);
    check_invariants(r, in);
}

TEST_CASE("impatient requests are abandoned") {
    std::vector<Request> w;
    for (int i = 0; i < 5; ++i) w.push_back(req(i, 10 + i, 0, AppClass::Email, "e/" + std::to_string(i), 100));
    const auto pop = eager_users(1);
    NetConfig net;
    net.capacity_bytes_per_bin[Resource::Transit] = 100;
    net.capacity_bytes_per_bin[Resource::Aggregation] = 1000;
    net.patience_s = 300;
    auto in = input_for(w, pop, {}, net);
    const auto r = run(in);
    CHECK(r.summary.dispositions[Disposition::Abandoned] > 0);
    CHECK(r.summary.dispositions[Disposition::ServedOriginal] >= 1);
    check_invariants(r, in);
}

TEST_CASE("accepted delay prefetches off-peak and consumes from the cache") {
    std::vector<Request> w{req(0, 20 * 3600, 0, AppClass::VideoOnDemand, "videoondemand/movie/1", 500'000'000)};
    const auto pop = eager_users(1);
    RuleSet rules{stage_shiftable()};
    auto in = input_for(w, pop, rules);
    in.horizon_s = 2 * kSecondsPerDay;
    SimOptions opts;
    opts.choice_override = always(DelayChoice{86400 + 5 * 3600});
    const auto r = run(in, opts);
    REQUIRE(r.deferrals.size() == 1);
    REQUIRE(r.deferrals[0].prefetch_start_s);
    CHECK(*r.deferrals[0].prefetch_start_s == 86400 + 7200);
    const std::size_t pre_bin = (86400 + 7200) / 300;
    const std::size_t use_bin = (86400 + 5 * 3600) / 300;
    CHECK(r.series[Resource::Transit].prefetch[pre_bin] == 500'000'000);
    CHECK(r.series[Resource::Transit].deferred[240] == 500'000'000);
    CHECK(r.series[Resource::Aggregation].offered[use_bin] == 500'000'000);
    CHECK(r.series[Resource::Transit].offered[use_bin] == 0);
    CHECK(r.dispositions[0].second == Disposition::ServedDeferred);
    CHECK(r.summary.offers_made == 1);
    CHECK(r.summary.offers_accepted == 1);
    CHECK(r.summary.credits_issued == 5);
    CHECK(r.ledger.balance(0) == 5);
    check_invariants(r, in);
}

TEST_CASE("no prefetch budget falls back to the original path at the new access time") {
    std::vector<Request> w{req(0, 20 * 3600, 0, AppClass::VideoOnDemand, "videoondemand/movie/1", 500'000'000)};
    const auto pop = eager_users(1);
    RuleSet rules{stage_shiftable()};
    auto net = tiny_net();
    net.prefetch_budget_fraction = 0.0;
    auto in = input_for(w, pop, rules, net);
    in.horizon_s = 2 * kSecondsPerDay;
    SimOptions opts;
    opts.choice_override = always(DelayChoice{86400 + 5 * 3600});
    const auto r = run(in, opts);
    REQUIRE(r.deferrals.size() == 1);
    CHECK_FALSE(r.deferrals[0].prefetch_start_s);
    const std::size_t use_bin = (86400 + 5 * 3600) / 300;
    CHECK(r.series[Resource::Transit].offered[use_bin] == 500'000'000);
    CHECK(r.dispositions[0].second == Disposition::ServedOriginal);
    check_invariants(r, in);
}

TEST_CASE("content shift serves a cached alternative over aggregation only") {
    std::vector<Request> w{req(0, 10, 0, AppClass::VideoOnDemand, "videoondemand/movie/1", 400'000'000),
                           req(1, 700, 1, AppClass::VideoOnDemand, "videoondemand/movie/2", 600'000'000)};
    const auto pop = eager_users(2);
    RuleSet rules{stage_shiftable()};
    auto in = input_for(w, pop, rules);
    SimOptions opts;
    opts.choice_override = [](const Request& r) -> std::optional<UserChoice> {
        if (r.request_id == 0) return UserChoice{ContinueChoice{}};
        return UserChoice{ShiftContentChoice{"videoondemand/movie/1"}};
    };
    const auto r = run(in, opts);
    CHECK(r.dispositions[1].second == Disposition::ServedAlternative);
    CHECK(r.series[Resource::Transit].offered[2] == 0);
    CHECK(r.series[Resource::Transit].shifted[2] == 600'000'000);
    CHECK(r.series[Resource::Aggregation].offered[2] == 400'000'000);
    CHECK(r.summary.cache_served_bytes == 400'000'000);
    CHECK(r.summary.offers_accepted == 1);
    check_invariants(r, in);
}

TEST_CASE("redirect decision table") {
    Rule redirect;
    redirect.match.app_classes = {AppClass::VideoOnDemand};
    redirect.strategy = Strategy::Redirect;
    RuleSet rules{redirect};
    const auto pop = eager_users(1);

    SUBCASE("miss goes upstream, later hit is served from the edge") {
        std::vector<Request> w{req(0, 10, 0, AppClass::VideoOnDemand, "v/1", 1000),
                               req(1, 400, 0, AppClass::VideoOnDemand, "v/1", 1000)};
        const auto in = input_for(w, pop, rules);
        const auto r = run(in);
        CHECK(r.series[Resource::Transit].offered[0] == 1000);
        CHECK(r.series[Resource::Transit].offered[1] == 0);
        CHECK(r.series[Resource::Aggregation].offered[1] == 1000);
        CHECK(r.summary.cache_hits == 1);
        CHECK(r.summary.cache_lookups == 2);
        check_invariants(r, in);
    }
    SUBCASE("neighbour hit costs nothing on either link") {
        std::vector<Request> w{req(0, 10, 0, AppClass::VideoOnDemand, "v/1", 1000)};
        auto net = tiny_net();
        net.neighbor_hit_probability = 1.0;
        const auto in = input_for(w, pop, rules, net);
        const auto r = run(in);
        CHECK(r.series[Resource::Transit].offered[0] == 0);
        CHECK(r.series[Resource::Aggregation].offered[0] == 0);
        CHECK(r.summary.home_served_bytes == 1000);
        check_invariants(r, in);
    }
}

TEST_CASE("rewrite uplift applies to front-page watchers") {
    Rule rewrite;
    rewrite.match.app_classes = {AppClass::VideoOnDemand};
    rewrite.strategy = Strategy::Rewrite;
    RuleSet rules{rewrite};
    auto pop = eager_users(2);
    pop[1].front_page_watcher = true;  // 0.6 x 3 caps at 1
    std::vector<Request> w{req(0, 10, 0, AppClass::VideoOnDemand, "v/1", 1000)};
    for (int i = 1; i <= 50; ++i) w.push_back(req(i, 10.0 + i, 1, AppClass::VideoOnDemand, "v/other", 1000));
    const auto in = input_for(w, pop, rules);
    const auto r = run(in);
    for (int i = 1; i <= 50; ++i) CHECK(r.dispositions[i].second == Disposition::ServedAlternative);
    check_invariants(r, in);
}

TEST_CASE("prompt cap resets at wall-clock midnight") {
    auto rule = stage_shiftable();
    rule.per_user_daily_prompt_cap = 1;
    RuleSet rules{rule};
    const auto pop = eager_users(1);
    std::vector<Request> w{req(0, 1000, 0, AppClass::BulkSync, "b/1", 200'000'000),
                           req(1, 2000, 0, AppClass::BulkSync, "b/2", 200'000'000),
                           req(2, 86400 + 1000, 0, AppClass::BulkSync, "b/3", 200'000'000)};
    auto in = input_for(w, pop, rules);
    in.horizon_s = 2 * kSecondsPerDay;
    SimOptions opts;
    opts.choice_override = always(ContinueChoice{});
    CHECK(run(in, opts).summary.offers_made == 2);
}

TEST_CASE("simulation errors") {
    const auto pop = eager_users(1);
    std::vector<Request> stranger{req(0, 10, 5, AppClass::Email, "e", 1)};
    CHECK_THROWS_AS(run(input_for(stranger, pop, {})), SimulationError);
    std::vector<Request> late{req(0, kSecondsPerDay, 0, AppClass::Email, "e", 1)};
    CHECK_THROWS_AS(run(input_for(late, pop, {})), SimulationError);

    std::vector<Request> w{req(0, 20 * 3600, 0, AppClass::VideoOnDemand, "v/1", 500'000'000)};
    RuleSet rules{stage_shiftable()};
    auto in = input_for(w, pop, rules);
    in.horizon_s = 2 * kSecondsPerDay;
    SimOptions opts;
    opts.choice_override = always(DelayChoice{10});  // before arrival
    CHECK_THROWS_AS(run(in, opts), SimulationError);
}

TEST_CASE("empty ruleset and zero acceptance match the DSM-off baseline") {
    const auto world = small_world(3, 400);
    SimInput in;
    in.workload = world.workload;
    in.population = world.population;
    in.clock_offset_s = world.config.clock_offset_s;
    in.seed = 9;
    SimOptions off;
    off.dsm_enabled = false;
    const auto base = run(in, off);

    const auto empty = run(in);
    CHECK(empty.series == base.series);

    RuleSet rules{stage_shiftable()};
    in.ruleset = rules;
    in.acceptance.timeshift_base = {{0, 0, 0}};
    in.acceptance.content_shift_base = {{0, 0, 0}};
    const auto zero = run(in);
    CHECK(zero.summary.offers_made > 0);
    CHECK(zero.summary.offers_accepted == 0);
    CHECK(zero.series == base.series);
    CHECK(csv_of(zero) == csv_of(base));
}

TEST_CASE("conservation and capacity invariants on random small worlds") {
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        const auto world = small_world(seed, 50 + seed * 7);
        RuleSet rules{stage_shiftable()};
        Rule redirect;
        redirect.match.app_classes = {AppClass::VideoOnDemand};
        redirect.strategy = Strategy::Redirect;
        Rule rewrite;
        rewrite.match.app_classes = {AppClass::P2P};
        rewrite.strategy = Strategy::Rewrite;
        rules[0].trigger.peak_window = DayWindow{64800, 82800};
        rules.push_back(redirect);
        rules.push_back(rewrite);
        NetConfig net;
        net.capacity_bytes_per_bin[Resource::Transit] = 3'000'000'000ULL;
        net.capacity_bytes_per_bin[Resource::Aggregation] = 4'000'000'000ULL;
        net.edge_cache_capacity_bytes = 20'000'000'000ULL;
        net.neighbor_hit_probability = 0.1;
        if (seed % 3 == 0) net.patience_s = 600;
        SimInput in;
        in.workload = world.workload;
        in.population = world.population;
        in.ruleset = rules;
        in.net = net;
        in.clock_offset_s = world.config.clock_offset_s;
        in.seed = seed;
        const auto r = run(in);
        check_invariants(r, in);
        const auto again = run(in);
        CHECK(summary_json(again) == summary_json(r));
        CHECK(csv_of(again) == csv_of(r));
    }
}

TEST_CASE("redirect hit stream equals a reference LRU replay") {
    const auto world = small_world(5, 300, 3.0);
    Rule redirect;
    redirect.match.app_classes = {AppClass::VideoOnDemand, AppClass::P2P};
    redirect.strategy = Strategy::Redirect;
    RuleSet rules{redirect};
    SimInput in;
    in.workload = world.workload;
    in.population = world.population;
    in.ruleset = rules;
    in.net = tiny_net();
    in.net.edge_cache_capacity_bytes = 30'000'000'000ULL;
    in.clock_offset_s = world.config.clock_offset_s;
    SimOptions opts;
    opts.record_cache_trace = true;
    const auto r = run(in, opts);

    oracle::ReferenceLru ref(in.net.edge_cache_capacity_bytes);
    std::vector<bool> expected;
    for (const auto& q : world.workload) {
        if (q.app != AppClass::VideoOnDemand && q.app != AppClass::P2P) continue;
        const bool hit = ref.lookup(q.content_id);
        expected.push_back(hit);
        if (!hit && q.size_bytes <= in.net.edge_cache_capacity_bytes) ref.insert(q.content_id, q.size_bytes);
    }
    std::vector<bool> got;
    for (const auto& op : r.cache_trace) {
        if (op.kind == CacheOp::Kind::Lookup) got.push_back(op.hit);
    }
    CHECK(got == expected);
    CHECK(r.summary.cache_hits > 0);
}

TEST_CASE("forced deferral matches the brute-force replay oracle") {
    const auto world = small_world(8, 600);
    RuleSet rules{stage_shiftable()};
    rules[0].trigger.peak_window = DayWindow{64800, 82800};
    SimInput in;
    in.workload = world.workload;
    in.population = world.population;
    in.ruleset = rules;
    in.net.capacity_bytes_per_bin[Resource::Transit] = 30'000'000'000ULL;
    in.net.capacity_bytes_per_bin[Resource::Aggregation] = 40'000'000'000ULL;
    in.net.edge_cache_capacity_bytes = 20'000'000'000ULL;
    in.clock_offset_s = world.config.clock_offset_s;
    OfferOptions window;
    window.off_peak_window = in.net.off_peak_window;
    window.clock_offset_s = in.clock_offset_s;
    window.latest_access_s = in.horizon_s;
    const auto plan = plan_forced_deferral(world.workload, DayWindow{64800, 82800}, 0.05, window, 300);
    REQUIRE(!plan.new_access_s.empty());
    CHECK(plan.achieved_fraction() <= 0.05);
    CHECK(plan.achieved_fraction() > 0.03);

    SimOptions opts;
    opts.choice_override = plan.as_override();
    const auto r = run(in, opts);

    oracle::ReplayConfig rc;
    rc.clock_offset_s = in.clock_offset_s;
    rc.transit_capacity = in.net.capacity_bytes_per_bin[Resource::Transit];
    rc.aggregation_capacity = in.net.capacity_bytes_per_bin[Resource::Aggregation];
    rc.prefetch_budget = prefetch_budget_per_bin(in.net);
    rc.cache_capacity = in.net.edge_cache_capacity_bytes;
    const auto expect = oracle::replay_forced_deferral(world.workload, plan.new_access_s, rc);
    CHECK(r.series[Resource::Transit].load() == expect.transit_load);
    CHECK(r.series[Resource::Transit].prefetch == expect.transit_prefetch);
    CHECK(r.series[Resource::Aggregation].served == expect.aggregation_served);

    const auto baseline = oracle::replay_forced_deferral(world.workload, {}, rc);
    SimOptions off;
    off.dsm_enabled = false;
    CHECK(run(in, off).series[Resource::Transit].load() == baseline.transit_load);
}

TEST_CASE("net config JSON round-trips and validates") {
    NetConfig n;
    n.patience_s = 120;
    n.price_schedule = PriceSchedule({{0, 1}, {64800, 2}});
    CHECK(parse_net_config(to_json(n)) == n);
    auto doc = to_json(NetConfig{});
    doc["resources"]["transit"]["capacity_bytes_per_bin"] = 0;
    try {
        parse_net_config(doc);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.path() == "/resources/transit/capacity_bytes_per_bin");
    }
}

TEST_CASE("series CSV layout") {
    std::vector<Request> w{req(0, 100, 0, AppClass::Email, "e/1", 1000)};
    const auto pop = eager_users(1);
    auto in = input_for(w, pop, {});
    in.horizon_s = 600;
    const auto csv = csv_of(run(in));
    CHECK(csv ==
          "bin_start_s,resource,offered,served,deferred,shifted,prefetch,utilization\n"
          "0,transit,1000,1000,0,0,0,1e-09\n"
          "0,aggregation,1000,1000,0,0,0,1e-09\n"
          "300,transit,0,0,0,0,0,0\n"
          "300,aggregation,0,0,0,0,0,0\n");
}
