#include <doctest.h>

#include <staggercast/errors.hpp>
#include <staggercast/policy_engine.hpp>
#include <staggercast/random.hpp>

#include <cmath>

using namespace staggercast;

namespace {

Rule stage_video(std::uint64_t min_size = 100'000'000) {
    Rule r;
    r.match.app_classes = {AppClass::VideoOnDemand};
    r.match.min_size_bytes = min_size;
    r.strategy = Strategy::Stage;
    r.offer_template = {IncentiveKind::ZeroRating, 1.0, 300};
    return r;
}

Request video(std::uint64_t size) {
    Request q;
    q.app = AppClass::VideoOnDemand;
    q.size_bytes = size;
    return q;
}

DecisionContext ctx_for(const Request& q, double util = 0.0) {
    DecisionContext ctx;
    ctx.download_size_bytes = q.size_bytes;
    ctx.qos_class = qos_of(q.app);
    ctx.link_utilization[Resource::Transit] = util;
    ctx.time_of_day_s = 20 * 3600;
    return ctx;
}

// Independent statement of the rule semantics, written out term by term.
std::optional<std::size_t> oracle_first_match(const RuleSet& rules, const Request& q, const DecisionContext& ctx) {
    for (std::size_t i = 0; i < rules.size(); ++i) {
        const Rule& r = rules[i];
        bool ok = true;
        if (!r.match.app_classes.empty()) ok = ok && r.match.app_classes.contains(q.app);
        ok = ok && ctx.download_size_bytes >= r.match.min_size_bytes;
        if (r.match.exclude_live) ok = ok && !q.live;
        if (!r.match.qos_classes.empty()) ok = ok && r.match.qos_classes.contains(ctx.qos_class);
        if (r.trigger.utilization_gte) {
            const double u = ctx.link_utilization[Resource::Transit] > ctx.link_utilization[Resource::Aggregation]
                                 ? ctx.link_utilization[Resource::Transit]
                                 : ctx.link_utilization[Resource::Aggregation];
            ok = ok && u >= *r.trigger.utilization_gte;
        }
        if (r.trigger.peak_window) {
            const double tod = std::fmod(ctx.time_of_day_s, 86400.0);
            const auto w = *r.trigger.peak_window;
            const bool inside = w.start_s < w.end_s ? (tod >= w.start_s && tod < w.end_s) : (tod >= w.start_s || tod < w.end_s);
            ok = ok && inside;
        }
        if (r.trigger.transit_price_gte) ok = ok && ctx.transit_price >= *r.trigger.transit_price_gte;
        ok = ok && ctx.user_history.prompts_today < r.per_user_daily_prompt_cap;
        if (ok) return i;
    }
    return std::nullopt;
}

}  // namespace

TEST_CASE("first matching rule decides") {
    RuleSet rules{stage_video(), stage_video(0)};
    rules[1].strategy = Strategy::Redirect;
    const auto big = video(500'000'000);
    auto ctx = ctx_for(big);
    const auto d = evaluate(rules, big, ctx);
    CHECK(d.name() == "Stage");
    CHECK(d.rule_index == 0u);
    CHECK(ctx.user_history.prompts_today == 1);

    const auto small = video(1000);
    auto ctx2 = ctx_for(small);
    const auto d2 = evaluate(rules, small, ctx2);
    CHECK(d2.name() == "Redirect");
    CHECK(std::get<RedirectAction>(d2.action).cache_node_id == "edge");
    CHECK(ctx2.user_history.prompts_today == 0);
}

TEST_CASE("no rule fires means PassThrough") {
    RuleSet rules{stage_video()};
    Request email;
    email.app = AppClass::Email;
    email.size_bytes = 1'000'000'000;
    auto ctx = ctx_for(email);
    const auto d = evaluate(rules, email, ctx);
    CHECK(d.pass_through());
    CHECK_FALSE(d.rule_index.has_value());
    CHECK(evaluate({}, email, ctx).pass_through());
}

TEST_CASE("daily prompt cap stops staging") {
    RuleSet rules{stage_video()};
    rules[0].per_user_daily_prompt_cap = 2;
    const auto q = video(500'000'000);
    auto ctx = ctx_for(q);
    CHECK(evaluate(rules, q, ctx).name() == "Stage");
    CHECK(evaluate(rules, q, ctx).name() == "Stage");
    CHECK(evaluate(rules, q, ctx).pass_through());
    CHECK(ctx.user_history.prompts_today == 2);
}

TEST_CASE("triggers") {
    auto rule = stage_video();
    rule.trigger.utilization_gte = 0.7;
    const auto q = video(500'000'000);
    auto cold = ctx_for(q, 0.5);
    CHECK_FALSE(trigger_holds(rule.trigger, cold));
    cold.link_utilization[Resource::Aggregation] = 0.9;
    CHECK(trigger_holds(rule.trigger, cold));

    RuleTrigger t;
    t.peak_window = DayWindow{64800, 82800};
    auto ctx = ctx_for(q);
    ctx.time_of_day_s = 3 * 3600;
    CHECK_FALSE(trigger_holds(t, ctx));
    ctx.time_of_day_s = 19 * 3600;
    CHECK(trigger_holds(t, ctx));

    RuleTrigger p;
    p.transit_price_gte = 2.0;
    ctx.transit_price = 1.5;
    CHECK_FALSE(trigger_holds(p, ctx));
    ctx.transit_price = 2.0;
    CHECK(trigger_holds(p, ctx));
}

TEST_CASE("exclude_live and qos match") {
    RuleMatch m;
    m.exclude_live = true;
    Request live;
    live.app = AppClass::LiveVideo;
    live.live = true;
    auto ctx = ctx_for(live);
    CHECK_FALSE(match_holds(m, live, ctx));
    RuleMatch qos;
    qos.qos_classes = {QosClass::Bulk};
    CHECK_FALSE(match_holds(qos, live, ctx));
    ctx.qos_class = QosClass::Bulk;
    CHECK(match_holds(qos, live, ctx));
}

TEST_CASE("evaluate agrees with a brute-force oracle on random rule sets") {
    Rng rng(99);
    auto pick = [&](std::size_t n) { return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)); };
    for (int trial = 0; trial < 2000; ++trial) {
        RuleSet rules(1 + pick(5));
        for (auto& r : rules) {
            for (auto app : all_values<AppClass>()) {
                if (uniform01(rng) < 0.3) r.match.app_classes.insert(app);
            }
            r.match.min_size_bytes = uniform01(rng) < 0.5 ? 0 : pick(1000);
            r.match.exclude_live = uniform01(rng) < 0.3;
            if (uniform01(rng) < 0.3) r.match.qos_classes.insert(static_cast<QosClass>(pick(3)));
            if (uniform01(rng) < 0.4) r.trigger.utilization_gte = uniform01(rng);
            if (uniform01(rng) < 0.4) r.trigger.peak_window = DayWindow{3600.0 * pick(24), 3600.0 * pick(24) + 1800};
            if (uniform01(rng) < 0.3) r.trigger.transit_price_gte = uniform01(rng) * 3;
            r.per_user_daily_prompt_cap = static_cast<std::uint32_t>(pick(4));
            r.strategy = static_cast<Strategy>(pick(3));
        }
        Request q;
        q.app = static_cast<AppClass>(pick(8));
        q.live = q.app == AppClass::LiveVideo && uniform01(rng) < 0.5;
        q.size_bytes = pick(1200);
        DecisionContext ctx;
        ctx.download_size_bytes = q.size_bytes;
        ctx.qos_class = qos_of(q.app);
        ctx.link_utilization[Resource::Transit] = uniform01(rng);
        ctx.link_utilization[Resource::Aggregation] = uniform01(rng);
        ctx.transit_price = uniform01(rng) * 3;
        ctx.time_of_day_s = uniform01(rng) * 86400;
        ctx.user_history.prompts_today = static_cast<std::uint32_t>(pick(4));

        const auto expected = oracle_first_match(rules, q, ctx);
        const auto before = ctx.user_history.prompts_today;
        const auto d = evaluate(rules, q, ctx);
        REQUIRE(d.rule_index == expected);
        const bool staged = expected && rules[*expected].strategy == Strategy::Stage;
        CHECK(ctx.user_history.prompts_today == before + (staged ? 1 : 0));
    }
}

TEST_CASE("ruleset JSON round-trips and reports paths") {
    RuleSet rules{stage_video()};
    rules[0].trigger.peak_window = DayWindow{64800, 82800};
    rules[0].trigger.utilization_gte = 0.8;
    Json doc = Json::array({to_json(rules[0])});
    const auto back = parse_ruleset(doc);
    REQUIRE(back.size() == 1);
    CHECK(to_json(back[0]) == doc[0]);

    doc[0]["match"]["app_classes"] = {"VideoOnDemand", "Telnet"};
    try {
        parse_ruleset(doc);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.path() == "/0/match/app_classes/1");
    }
    Json empty_match = Json::array({{{"match", Json::object()}, {"strategy", "Stage"},
                                     {"offer_template", {{"kind", "ZeroRating"}, {"magnitude", 1}}}}});
    CHECK_THROWS_AS(parse_ruleset(empty_match), ConfigError);
    CHECK_THROWS_AS(parse_ruleset(Json::object()), ConfigError);
}

TEST_CASE("credits per accepted offer") {
    CHECK(credits_for({IncentiveKind::LoyaltyCredits, 25, 300}, 10) == 25);
    CHECK(credits_for({IncentiveKind::ZeroRating, 0.5, 300}, 10) == 10);
}

TEST_CASE("price schedule lookup") {
    PriceSchedule s({{0, 1.0}, {64800, 3.0}, {82800, 1.5}});
    CHECK(transit_price(s, 0) == 1.0);
    CHECK(transit_price(s, 64799) == 1.0);
    CHECK(transit_price(s, 64800) == 3.0);
    CHECK(transit_price(s, 86399) == 1.5);
    CHECK(transit_price(s, 86400 + 70000) == 3.0);
    CHECK_THROWS_AS(PriceSchedule({{10, 1.0}}), PreconditionError);
    CHECK_THROWS_AS(PriceSchedule({{0, 1.0}, {0, 2.0}}), PreconditionError);
    CHECK(parse_price_schedule(Json(2.5), "/p") == PriceSchedule::flat(2.5));
    CHECK_THROWS_AS(parse_price_schedule(Json::array({{{"start_s", 5}, {"price", 1}}}), "/p"), ConfigError);
}
