#include "staggercast/policy_engine.hpp"

#include "staggercast/errors.hpp"

#include <algorithm>
#include <cmath>

namespace staggercast {

std::int64_t credits_for(const IncentiveOffer& offer, std::int64_t default_points) {
    if (offer.kind == IncentiveKind::LoyaltyCredits) return static_cast<std::int64_t>(std::llround(offer.magnitude));
    return default_points;
}

std::string_view EnactmentDecision::name() const {
    switch (action.index()) {
        case 1: return "Stage";
        case 2: return "Rewrite";
        case 3: return "Redirect";
        default: return "PassThrough";
    }
}

bool match_holds(const RuleMatch& match, const Request& request, const DecisionContext& ctx) {
    if (!match.app_classes.empty() && !match.app_classes.contains(request.app)) return false;
    if (ctx.download_size_bytes < match.min_size_bytes) return false;
    if (match.exclude_live && request.live) return false;
    if (!match.qos_classes.empty() && !match.qos_classes.contains(ctx.qos_class)) return false;
    return true;
}

bool trigger_holds(const RuleTrigger& trigger, const DecisionContext& ctx) {
    if (trigger.utilization_gte) {
        const double busiest =
            std::max(ctx.link_utilization[Resource::Transit], ctx.link_utilization[Resource::Aggregation]);
        if (busiest < *trigger.utilization_gte) return false;
    }
    if (trigger.peak_window && !trigger.peak_window->contains(time_of_day(ctx.time_of_day_s))) return false;
    if (trigger.transit_price_gte && ctx.transit_price < *trigger.transit_price_gte) return false;
    return true;
}

bool cap_available(const Rule& rule, const DecisionContext& ctx) {
    return ctx.user_history.prompts_today < rule.per_user_daily_prompt_cap;
}

EnactmentDecision evaluate(std::span<const Rule> ruleset, const Request& request, DecisionContext& ctx) {
    for (std::size_t i = 0; i < ruleset.size(); ++i) {
        const Rule& rule = ruleset[i];
        if (!match_holds(rule.match, request, ctx) || !trigger_holds(rule.trigger, ctx) || !cap_available(rule, ctx)) {
            continue;
        }
        switch (rule.strategy) {
            case Strategy::Stage:
                ++ctx.user_history.prompts_today;
                return {StageAction{rule.offer_template,
                                    {ChoiceKind::Continue, ChoiceKind::Delay, ChoiceKind::ShiftContent}},
                        i};
            case Strategy::Rewrite:
                return {RewriteAction{}, i};
            case Strategy::Redirect:
                return {RedirectAction{rule.cache_node_id}, i};
        }
    }
    return {PassThrough{}, std::nullopt};
}

// ---------------------------------------------------------------------------
// JSON

void validate_rule(const Rule& rule, const std::string& path) {
    const auto& m = rule.match;
    if (m.app_classes.empty() && m.min_size_bytes == 0 && !m.exclude_live && m.qos_classes.empty()) {
        throw ConfigError(path + "/match", "at least one match field must be set");
    }
    if (rule.trigger.utilization_gte && (*rule.trigger.utilization_gte < 0.0 || *rule.trigger.utilization_gte > 1.0)) {
        throw ConfigError(path + "/trigger/utilization_gte", "must be in [0, 1]");
    }
    if (rule.trigger.peak_window &&
        time_of_day(rule.trigger.peak_window->start_s) == time_of_day(rule.trigger.peak_window->end_s)) {
        throw ConfigError(path + "/trigger/peak_window", "start must differ from end modulo a day");
    }
    const auto& offer = rule.offer_template;
    if (!(offer.magnitude >= 0.0)) throw ConfigError(path + "/offer_template/magnitude", "must be non-negative");
    if (offer.kind == IncentiveKind::LoyaltyCredits && std::floor(offer.magnitude) != offer.magnitude) {
        throw ConfigError(path + "/offer_template/magnitude", "LoyaltyCredits magnitude must be an integer point count");
    }
    if (!(offer.expiry_s > 0.0)) throw ConfigError(path + "/offer_template/expiry_s", "must be positive");
}

IncentiveOffer parse_offer(const Json& doc, const std::string& path) {
    JsonObject obj(doc, path);
    IncentiveOffer offer;
    offer.kind = as_enum<IncentiveKind>(obj.required("kind"), obj.child("kind"));
    offer.magnitude = as_number(obj.required("magnitude"), obj.child("magnitude"));
    if (const Json* v = obj.optional("expiry_s")) offer.expiry_s = as_number(*v, obj.child("expiry_s"));
    obj.finish();
    return offer;
}

namespace {

Rule parse_rule(const Json& doc, const std::string& path) {
    JsonObject obj(doc, path);
    Rule rule;
    {
        JsonObject m(obj.required("match"), obj.child("match"));
        if (const Json* v = m.optional("app_classes")) rule.match.app_classes = as_enum_set<AppClass>(*v, m.child("app_classes"));
        if (const Json* v = m.optional("min_size_bytes")) rule.match.min_size_bytes = as_uint(*v, m.child("min_size_bytes"));
        if (const Json* v = m.optional("exclude_live")) rule.match.exclude_live = as_bool(*v, m.child("exclude_live"));
        if (const Json* v = m.optional("qos_classes")) rule.match.qos_classes = as_enum_set<QosClass>(*v, m.child("qos_classes"));
        m.finish();
    }
    if (const Json* t = obj.optional("trigger")) {
        JsonObject trig(*t, obj.child("trigger"));
        if (const Json* v = trig.optional("utilization_gte")) {
            rule.trigger.utilization_gte = as_number(*v, trig.child("utilization_gte"));
        }
        if (const Json* v = trig.optional("peak_window")) rule.trigger.peak_window = as_window(*v, trig.child("peak_window"));
        if (const Json* v = trig.optional("transit_price_gte")) {
            rule.trigger.transit_price_gte = as_number(*v, trig.child("transit_price_gte"));
        }
        trig.finish();
    }
    if (const Json* v = obj.optional("per_user_daily_prompt_cap")) {
        const auto cap = as_uint(*v, obj.child("per_user_daily_prompt_cap"));
        if (cap > 0xffffffffULL) throw ConfigError(obj.child("per_user_daily_prompt_cap"), "too large");
        rule.per_user_daily_prompt_cap = static_cast<std::uint32_t>(cap);
    }
    rule.strategy = as_enum<Strategy>(obj.required("strategy"), obj.child("strategy"));
    rule.offer_template = parse_offer(obj.required("offer_template"), obj.child("offer_template"));
    if (const Json* v = obj.optional("cache_node_id")) rule.cache_node_id = as_string(*v, obj.child("cache_node_id"));
    obj.finish();
    validate_rule(rule, path);
    return rule;
}

template <class E>
Json enum_set_json(EnumSet<E> set) {
    Json out = Json::array();
    for (E e : all_values<E>()) {
        if (set.contains(e)) out.push_back(std::string(to_string(e)));
    }
    return out;
}

}  // namespace

RuleSet parse_ruleset(const Json& doc) {
    if (!doc.is_array()) throw ConfigError("", "ruleset must be an array of rules");
    RuleSet rules;
    for (std::size_t i = 0; i < doc.size(); ++i) rules.push_back(parse_rule(doc[i], "/" + std::to_string(i)));
    return rules;
}

Json to_json(const IncentiveOffer& offer) {
    return {{"kind", std::string(to_string(offer.kind))}, {"magnitude", offer.magnitude}, {"expiry_s", offer.expiry_s}};
}

Json to_json(const Rule& rule) {
    Json match = Json::object();
    if (!rule.match.app_classes.empty()) match["app_classes"] = enum_set_json(rule.match.app_classes);
    if (rule.match.min_size_bytes) match["min_size_bytes"] = rule.match.min_size_bytes;
    if (rule.match.exclude_live) match["exclude_live"] = true;
    if (!rule.match.qos_classes.empty()) match["qos_classes"] = enum_set_json(rule.match.qos_classes);
    Json trigger = Json::object();
    if (rule.trigger.utilization_gte) trigger["utilization_gte"] = *rule.trigger.utilization_gte;
    if (rule.trigger.peak_window) trigger["peak_window"] = {rule.trigger.peak_window->start_s, rule.trigger.peak_window->end_s};
    if (rule.trigger.transit_price_gte) trigger["transit_price_gte"] = *rule.trigger.transit_price_gte;
    return {{"match", match},
            {"trigger", trigger},
            {"per_user_daily_prompt_cap", rule.per_user_daily_prompt_cap},
            {"strategy", std::string(to_string(rule.strategy))},
            {"offer_template", to_json(rule.offer_template)},
            {"cache_node_id", rule.cache_node_id}};
}

// ---------------------------------------------------------------------------
// Transit pricing

PriceSchedule::PriceSchedule(std::vector<Segment> segments) : segments_(std::move(segments)) {
    if (segments_.empty() || segments_.front().start_s != 0.0) {
        throw PreconditionError("price schedule must start at 0 s to cover the whole day");
    }
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        const auto& s = segments_[i];
        if (!(s.price >= 0.0) || !std::isfinite(s.price)) throw PreconditionError("prices must be non-negative");
        if (s.start_s >= kSecondsPerDay) throw PreconditionError("segment start must be below 86400 s");
        if (i > 0 && !(s.start_s > segments_[i - 1].start_s)) {
            throw PreconditionError("segment starts must be strictly increasing");
        }
    }
}

double transit_price(const PriceSchedule& schedule, double time_of_day_s) {
    const double tod = time_of_day(time_of_day_s);
    const auto segments = schedule.segments();
    auto it = std::upper_bound(segments.begin(), segments.end(), tod,
                               [](double t, const PriceSchedule::Segment& s) { return t < s.start_s; });
    return std::prev(it)->price;
}

PriceSchedule parse_price_schedule(const Json& doc, const std::string& path) {
    if (doc.is_number()) return PriceSchedule::flat(as_number(doc, path));
    if (!doc.is_array()) throw ConfigError(path, "expected a number or an array of {start_s, price}");
    std::vector<PriceSchedule::Segment> segments;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string p = path + "/" + std::to_string(i);
        JsonObject obj(doc[i], p);
        segments.push_back({as_number(obj.required("start_s"), obj.child("start_s")),
                            as_number(obj.required("price"), obj.child("price"))});
        obj.finish();
    }
    try {
        return PriceSchedule(std::move(segments));
    } catch (const PreconditionError& e) {
        throw ConfigError(path, e.what());
    }
}

}  // namespace staggercast
