#pragma once

#include "staggercast/demand_model.hpp"
#include "staggercast/json_fields.hpp"
#include "staggercast/policy_engine.hpp"
#include "staggercast/random.hpp"
#include "staggercast/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace staggercast {

enum class VideoDelayAttitude : std::uint8_t { Always, Sometimes, Never };

struct UserProfile {
    UserId user_id = 0;
    Propensity timeshift_propensity = Propensity::Never;
    /// Survey "N/A" answers behave as Never but stay distinguishable.
    bool timeshift_na = false;
    /// Willingness to push an application more than three hours out.
    EnumMap<AppClass, double> per_app_over3h_willingness{};
    Propensity content_shift_propensity = Propensity::Never;
    bool content_shift_na = false;
    /// True where the user is very unlikely to delay that genre.
    EnumMap<Genre, bool> genre_delay_block{};
    EnumMap<IncentiveKind, double> incentive_weight{};
    bool specific_video_intent = false;
    bool front_page_watcher = false;
    VideoDelayAttitude video_delay = VideoDelayAttitude::Sometimes;
    bool vod_everyday = false;

    friend bool operator==(const UserProfile&, const UserProfile&) = default;
};

/// Per-offer acceptance parameters. These are modelling defaults, not survey figures.
struct AcceptanceModel {
    EnumMap<Propensity, double> timeshift_base{{0.0, 0.3, 0.8}};
    EnumMap<Propensity, double> content_shift_base{{0.0, 0.2, 0.6}};
    /// When false, content-shift acceptance ignores the incentive weight.
    bool content_shift_uses_incentive = true;
    /// Multiplier on content-shift probability for front-page watchers under Rewrite.
    double front_page_uplift = 3.0;
    /// Delays longer than this are gated by per_app_over3h_willingness.
    double long_delay_s = 3 * 3600.0;

    friend bool operator==(const AcceptanceModel&, const AcceptanceModel&) = default;
};

/// Survey marginals the population is sampled from.
struct PopulationSpec {
    struct Timeshift {
        double never = 0.28;
        double often_or_occasionally = 0.70;
        double na = 0.02;
        double often = 0.20;
        double occasionally = 0.50;
        friend bool operator==(const Timeshift&, const Timeshift&) = default;
    } timeshift;
    /// Every class except RemoteWork, which is driven by remote_work_never.
    EnumMap<AppClass, double> per_app_over3h_willingness{{0.50, 0.10, 0.50, 0.06, 0.0, 0.30, 0.70, 0.70}};
    double remote_work_never = 0.54;
    struct ContentShift {
        double never = 0.30;
        double occasionally = 0.56;
        double often = 0.06;
        double na = 0.08;
        friend bool operator==(const ContentShift&, const ContentShift&) = default;
    } content_shift;
    double always_delay = 0.15;
    double never_delay = 0.12;
    EnumMap<Genre, double> genre_very_unlikely_to_delay{{0.44, 0.19, 0.0, 0.0, 0.0, 0.0}};
    EnumMap<IncentiveKind, double> incentive_popularity{{0.60, 0.50, 0.40, 0.45, 0.52, 0.30, 0.29, 0.20, 0.35}};
    double front_page_watcher = 0.08;
    double vod_everyday = 0.17;
    double specific_video_intent = 0.51;
    AcceptanceModel acceptance;

    friend bool operator==(const PopulationSpec&, const PopulationSpec&) = default;
};

/// Throws ConfigError on out-of-range marginals or category splits that do not sum to 1.
void validate(const PopulationSpec& spec);
PopulationSpec parse_population_spec(const Json& doc);
Json to_json(const PopulationSpec& spec);

/// Profiles for users 0..n-1, deterministic under `seed`.
std::vector<UserProfile> sample_population(const PopulationSpec& spec, std::size_t n, std::uint64_t seed);

struct ContinueChoice {
    friend bool operator==(const ContinueChoice&, const ContinueChoice&) = default;
};
struct DelayChoice {
    double new_access_s = 0.0;
    friend bool operator==(const DelayChoice&, const DelayChoice&) = default;
};
struct ShiftContentChoice {
    std::string alternative_content_id;
    friend bool operator==(const ShiftContentChoice&, const ShiftContentChoice&) = default;
};
using UserChoice = std::variant<ContinueChoice, DelayChoice, ShiftContentChoice>;

ChoiceKind kind_of(const UserChoice& choice);

struct OfferOptions {
    EnumSet<ChoiceKind> kinds{ChoiceKind::Continue};
    /// Cached alternative backing a ShiftContent option.
    std::optional<std::string> alternative_content_id;
    DayWindow off_peak_window{2 * 3600.0, 6 * 3600.0};
    /// Wall-clock time-of-day at t = 0.
    double clock_offset_s = 0.0;
    /// Delay targets must be strictly earlier than this (simulation horizon).
    std::optional<double> latest_access_s;
};

/// Next usable stretch of the off-peak window after `arrival_s`, in simulation
/// time; empty when the window does not recur before `latest_access_s`.
struct TimeRange {
    double begin = 0.0;
    double end = 0.0;
};
std::optional<TimeRange> next_off_peak(double arrival_s, const OfferOptions& options);

/// Probability that `respond` returns Delay.
double delay_probability(const UserProfile& profile, const IncentiveOffer& offer, const Request& request,
                         const OfferOptions& options, const AcceptanceModel& model);
/// Probability of accepting a content shift, given Delay was not chosen.
double content_shift_probability(const UserProfile& profile, const IncentiveOffer& offer,
                                 const OfferOptions& options, const AcceptanceModel& model, double uplift = 1.0);

/// Draws the user's answer to a staged offer. Delay is tried first, then a
/// content shift, otherwise Continue. Always consumes exactly three draws.
UserChoice respond(const UserProfile& profile, const IncentiveOffer& offer, const Request& request,
                   const OfferOptions& options, const AcceptanceModel& model, Rng& rng);

struct CatalogItem {
    std::string content_id;
    Genre genre = Genre::None;
    std::uint64_t size_bytes = 0;
};

/// Highest-ranked (earliest) cached item of the request's genre, other than
/// the requested item itself. Users without a specific video in mind fall back
/// to the highest-ranked item of any genre.
std::optional<std::string> pick_alternative(std::span<const CatalogItem> catalog, const Request& request,
                                            const UserProfile& profile);

}  // namespace staggercast

