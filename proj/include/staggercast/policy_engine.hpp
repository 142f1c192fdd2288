#pragma once

#include "staggercast/demand_model.hpp"
#include "staggercast/json_fields.hpp"
#include "staggercast/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace staggercast {

struct IncentiveOffer {
    IncentiveKind kind = IncentiveKind::LoyaltyCredits;
    /// Kind-specific: points for LoyaltyCredits, a fraction for discounts, etc.
    double magnitude = 0.0;
    /// How long a staged offer stays open, in seconds.
    double expiry_s = 300.0;

    friend bool operator==(const IncentiveOffer&, const IncentiveOffer&) = default;
};

/// Points credited when a user accepts `offer`. LoyaltyCredits carries its own
/// point count; every other kind is worth `default_points`.
std::int64_t credits_for(const IncentiveOffer& offer, std::int64_t default_points);

struct UserHistory {
    std::uint32_t prompts_today = 0;
    std::uint64_t accepts_total = 0;
    std::uint64_t declines_total = 0;
    std::int64_t credits = 0;
};

struct DecisionContext {
    EnumMap<Resource, double> link_utilization{};
    double transit_price = 0.0;
    UserHistory user_history;
    std::uint64_t download_size_bytes = 0;
    QosClass qos_class = QosClass::Interactive;
    double time_of_day_s = 0.0;
};

struct RuleMatch {
    EnumSet<AppClass> app_classes;  // empty: any class
    std::uint64_t min_size_bytes = 0;
    bool exclude_live = false;
    EnumSet<QosClass> qos_classes;  // empty: any class
};

struct RuleTrigger {
    /// Fires when the busier of the two resources is at least this utilized.
    std::optional<double> utilization_gte;
    std::optional<DayWindow> peak_window;
    std::optional<double> transit_price_gte;
};

struct Rule {
    RuleMatch match;
    RuleTrigger trigger;
    std::uint32_t per_user_daily_prompt_cap = 3;
    Strategy strategy = Strategy::Stage;
    IncentiveOffer offer_template;
    /// Target for Redirect decisions.
    std::string cache_node_id = "edge";
};

using RuleSet = std::vector<Rule>;

struct PassThrough {
    friend bool operator==(const PassThrough&, const PassThrough&) = default;
};
struct StageAction {
    IncentiveOffer offer;
    EnumSet<ChoiceKind> options;
    friend bool operator==(const StageAction&, const StageAction&) = default;
};
struct RewriteAction {
    std::string selector = "data-content-id";
    friend bool operator==(const RewriteAction&, const RewriteAction&) = default;
};
struct RedirectAction {
    std::string cache_node_id;
    friend bool operator==(const RedirectAction&, const RedirectAction&) = default;
};

struct EnactmentDecision {
    std::variant<PassThrough, StageAction, RewriteAction, RedirectAction> action;
    /// Index of the rule that produced the decision; empty for PassThrough.
    std::optional<std::size_t> rule_index;

    bool pass_through() const { return std::holds_alternative<PassThrough>(action); }
    std::string_view name() const;

    friend bool operator==(const EnactmentDecision&, const EnactmentDecision&) = default;
};

bool match_holds(const RuleMatch& match, const Request& request, const DecisionContext& ctx);
bool trigger_holds(const RuleTrigger& trigger, const DecisionContext& ctx);
bool cap_available(const Rule& rule, const DecisionContext& ctx);

/// First rule whose match and trigger hold and whose daily prompt cap is not
/// exhausted decides; otherwise PassThrough. A Stage decision increments
/// `ctx.user_history.prompts_today`; nothing else is mutated.
EnactmentDecision evaluate(std::span<const Rule> ruleset, const Request& request, DecisionContext& ctx);

/// Throws ConfigError with a `/<rule index>/...` path.
void validate_rule(const Rule& rule, const std::string& path);
RuleSet parse_ruleset(const Json& doc);
Json to_json(const Rule& rule);
Json to_json(const IncentiveOffer& offer);
IncentiveOffer parse_offer(const Json& doc, const std::string& path);

/// Piecewise-constant price per GB over the day. Segment i covers
/// [start_i, start_{i+1}); the first segment starts at 0 so the day is covered.
class PriceSchedule {
public:
    struct Segment {
        double start_s;
        double price;
        friend bool operator==(const Segment&, const Segment&) = default;
    };

    PriceSchedule() : segments_{{0.0, 0.0}} {}
    explicit PriceSchedule(std::vector<Segment> segments);

    static PriceSchedule flat(double price) { return PriceSchedule({{0.0, price}}); }

    std::span<const Segment> segments() const { return segments_; }

    friend bool operator==(const PriceSchedule&, const PriceSchedule&) = default;

private:
    std::vector<Segment> segments_;
};

double transit_price(const PriceSchedule& schedule, double time_of_day_s);
PriceSchedule parse_price_schedule(const Json& doc, const std::string& path);

}  // namespace staggercast
