#pragma once

#include "staggercast/credit_ledger.hpp"
#include "staggercast/demand_model.hpp"
#include "staggercast/json_fields.hpp"
#include "staggercast/lru_cache.hpp"
#include "staggercast/policy_engine.hpp"
#include "staggercast/user_agents.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace staggercast {

/// Two-resource access network: a transit link into the ISP and the
/// aggregation link between the edge cache (at the BRAS) and subscribers.
struct NetConfig {
    double bin_s = 300.0;
    EnumMap<Resource, std::uint64_t> capacity_bytes_per_bin{{100'000'000'000ULL, 120'000'000'000ULL}};
    std::uint64_t edge_cache_capacity_bytes = 2'000'000'000'000ULL;
    /// Chance that a redirected request is served by a neighbour's home cache.
    double neighbor_hit_probability = 0.0;
    DayWindow off_peak_window{2 * 3600.0, 6 * 3600.0};
    /// Share of transit capacity per bin that prefetches may reserve.
    double prefetch_budget_fraction = 0.5;
    PriceSchedule price_schedule = PriceSchedule::flat(1.0);
    /// Requests facing a longer estimated queueing wait are abandoned. Unset: infinite patience.
    std::optional<double> patience_s;
    std::int64_t credits_per_accept = 10;
    /// Most-recently-used cache entries considered as content-shift alternatives.
    std::size_t alternative_candidates = 200;

    friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

void validate(const NetConfig& config);
NetConfig parse_net_config(const Json& doc);
Json to_json(const NetConfig& config);

std::uint64_t prefetch_budget_per_bin(const NetConfig& config);

/// max/mean of a non-negative, not-all-zero series.
double peak_to_mean(std::span<const double> series);
/// Nearest-rank percentile, q in (0, 1].
double percentile(std::span<const double> series, double q);

/// First-fit reservation of transit budget for prefetches, one bin per object.
class PrefetchPlanner {
public:
    PrefetchPlanner(std::size_t bins, double bin_s, std::uint64_t budget_per_bin);

    /// Earliest bin starting inside `window` whose remaining budget fits `size_bytes`
    /// and which ends no later than `deadline_s`. Reserves the bytes and returns the
    /// prefetch start time (bin start, clamped to the window start); empty when no
    /// bin qualifies.
    std::optional<double> schedule(std::uint64_t size_bytes, TimeRange window, double deadline_s);
    void release(double start_s, std::uint64_t size_bytes);

    std::uint64_t remaining(std::size_t bin) const { return remaining_.at(bin); }
    std::size_t bin_of(double t) const;

private:
    double bin_s_;
    std::vector<std::uint64_t> remaining_;
};

enum class Disposition : std::uint8_t { ServedOriginal, ServedAlternative, ServedDeferred, Abandoned };

template <>
struct EnumNames<Disposition> {
    static constexpr std::array<std::string_view, 4> names{"ServedOriginal", "ServedAlternative", "ServedDeferred",
                                                           "Abandoned"};
};

struct BinSeries {
    std::vector<std::uint64_t> offered;
    std::vector<std::uint64_t> served;
    std::vector<std::uint64_t> deferred;
    std::vector<std::uint64_t> shifted;
    std::vector<std::uint64_t> prefetch;
    std::vector<double> utilization;

    /// served + prefetch per bin.
    std::vector<double> load() const;
    friend bool operator==(const BinSeries&, const BinSeries&) = default;
};

struct ResourceSummary {
    double peak_to_mean = 0.0;
    double p95 = 0.0;
    double peak = 0.0;
    std::uint64_t offered_bytes = 0;
    std::uint64_t served_bytes = 0;
    std::uint64_t prefetch_bytes = 0;
    std::uint64_t backlog_bytes = 0;  // still queued at the horizon
};

struct CacheOp {
    enum class Kind : std::uint8_t { Lookup, Insert };
    Kind kind;
    std::string content_id;
    std::uint64_t size_bytes = 0;
    bool hit = false;  // lookups only
};

struct DeferralRecord {
    RequestId request_id = 0;
    double arrival_s = 0.0;
    double new_access_s = 0.0;
    std::uint64_t size_bytes = 0;
    std::optional<double> prefetch_start_s;  // empty: fell back to the original path
};

struct SimSummary {
    EnumMap<Resource, ResourceSummary> resources{};
    double cache_hit_ratio = 0.0;
    std::uint64_t cache_lookups = 0;
    std::uint64_t cache_hits = 0;
    std::uint64_t offers_made = 0;
    std::uint64_t offers_accepted = 0;
    std::int64_t credits_issued = 0;
    EnumMap<Disposition, std::uint64_t> dispositions{};
    std::uint64_t delivered_bytes = 0;
    std::uint64_t transit_bytes = 0;  // transit-path bytes plus prefetches
    std::uint64_t cache_served_bytes = 0;
    std::uint64_t home_served_bytes = 0;

    double acceptance_rate() const {
        return offers_made == 0 ? 0.0 : static_cast<double>(offers_accepted) / static_cast<double>(offers_made);
    }
};

struct SimReport {
    double bin_s = 0.0;
    std::size_t bins = 0;
    EnumMap<Resource, BinSeries> series{};
    SimSummary summary;
    std::vector<std::pair<RequestId, Disposition>> dispositions;  // input order
    std::vector<DeferralRecord> deferrals;
    std::vector<CacheOp> cache_trace;  // filled when requested
    CreditLedger ledger;
};

Json summary_json(const SimReport& report);
void write_series_csv(std::ostream& out, const SimReport& report);
inline constexpr std::string_view kSeriesHeader = "bin_start_s,resource,offered,served,deferred,shifted,prefetch,utilization";

struct SimInput {
    std::span<const Request> workload;
    std::span<const UserProfile> population;
    AcceptanceModel acceptance;
    std::span<const Rule> ruleset;
    NetConfig net;
    std::uint64_t seed = 0;
    double horizon_s = kSecondsPerDay;
    /// Wall-clock time-of-day at t = 0.
    double clock_offset_s = 0.0;
};

using ChoiceOverride = std::function<std::optional<UserChoice>(const Request&)>;

struct SimOptions {
    /// false: the DSM-off baseline (no rule evaluation at all).
    bool dsm_enabled = true;
    /// Replaces the user's response to a staged offer when it returns a value.
    ChoiceOverride choice_override;
    bool record_cache_trace = false;
};

/// Runs the discrete-event simulation. Events are ordered by (time, kind
/// Arrival < PrefetchStart < DeferredConsume, request id). Throws
/// SimulationError when a user has no profile or an event falls past the horizon.
SimReport run(const SimInput& input, const SimOptions& options = {});

/// Defers up to `fraction` of the peak-window bytes by greedy peak shaving:
/// repeatedly takes the largest shiftable request that still fits the byte
/// budget from the currently heaviest peak-window bin. New access times are
/// spread evenly over each request's next off-peak window.
struct ForcedDeferralPlan {
    std::map<RequestId, double> new_access_s;
    std::uint64_t peak_window_bytes = 0;
    std::uint64_t deferred_bytes = 0;

    double achieved_fraction() const {
        return peak_window_bytes == 0 ? 0.0
                                      : static_cast<double>(deferred_bytes) / static_cast<double>(peak_window_bytes);
    }
    ChoiceOverride as_override() const;
};

ForcedDeferralPlan plan_forced_deferral(std::span<const Request> workload, DayWindow peak_window, double fraction,
                                        const OfferOptions& window_options, double bin_s,
                                        const ShiftablePolicy& shiftable = {});

}  // namespace staggercast
