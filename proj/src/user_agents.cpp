#include "staggercast/user_agents.hpp"

#include "staggercast/errors.hpp"

#include <cmath>

namespace staggercast {

namespace {

constexpr double kSplitTolerance = 1e-9;

// Incentive kinds as named in the population document.
constexpr std::array<std::string_view, 9> kIncentiveKeys{
    "qos_guarantee_later", "contract_discount", "zero_rating",     "bundle_discount", "ad_removal_video",
    "quality_upgrade_video", "environmental",   "congestion_info", "loyalty_credits"};

std::string genre_key(Genre g) {
    std::string s(to_string(g));
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

void check_probability(double p, const std::string& path) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(path, "must be in [0, 1]");
}

void check_sum(double sum, double target, const std::string& path) {
    if (std::abs(sum - target) > kSplitTolerance) {
        throw ConfigError(path, "categories sum to " + format_double(sum) + ", expected " + format_double(target));
    }
}

}  // namespace

void validate(const PopulationSpec& spec) {
    const auto& ts = spec.timeshift;
    check_probability(ts.never, "/timeshift/never");
    check_probability(ts.often_or_occasionally, "/timeshift/often_or_occasionally");
    check_probability(ts.na, "/timeshift/na");
    check_probability(ts.often, "/timeshift/often");
    check_probability(ts.occasionally, "/timeshift/occasionally");
    check_sum(ts.never + ts.often_or_occasionally + ts.na, 1.0, "/timeshift");
    check_sum(ts.often + ts.occasionally, ts.often_or_occasionally, "/timeshift/often");

    for (AppClass app : all_values<AppClass>()) {
        check_probability(spec.per_app_over3h_willingness[app],
                          "/per_app_over3h_willingness/" + std::string(to_string(app)));
    }
    check_probability(spec.remote_work_never, "/remote_work_never");

    const auto& cs = spec.content_shift;
    check_probability(cs.never, "/content_shift/never");
    check_probability(cs.occasionally, "/content_shift/occasionally");
    check_probability(cs.often, "/content_shift/often");
    check_probability(cs.na, "/content_shift/na");
    check_sum(cs.never + cs.occasionally + cs.often + cs.na, 1.0, "/content_shift");

    check_probability(spec.always_delay, "/always_delay");
    check_probability(spec.never_delay, "/never_delay");
    if (spec.always_delay + spec.never_delay > 1.0 + kSplitTolerance) {
        throw ConfigError("/never_delay", "always_delay + never_delay exceeds 1");
    }
    for (Genre g : all_values<Genre>()) {
        check_probability(spec.genre_very_unlikely_to_delay[g], "/genre_very_unlikely_to_delay/" + genre_key(g));
    }
    for (IncentiveKind k : all_values<IncentiveKind>()) {
        check_probability(spec.incentive_popularity[k],
                          "/incentive_popularity/" + std::string(kIncentiveKeys[static_cast<std::size_t>(k)]));
    }
    check_probability(spec.front_page_watcher, "/front_page_watcher");
    check_probability(spec.vod_everyday, "/vod_everyday");
    check_probability(spec.specific_video_intent, "/specific_video_intent");
    if (spec.front_page_watcher + spec.specific_video_intent > 1.0 + kSplitTolerance) {
        throw ConfigError("/front_page_watcher", "front_page_watcher + specific_video_intent exceeds 1");
    }

    const auto& m = spec.acceptance;
    for (Propensity p : all_values<Propensity>()) {
        check_probability(m.timeshift_base[p], "/acceptance_model/timeshift_base/" + std::string(to_string(p)));
        check_probability(m.content_shift_base[p], "/acceptance_model/content_shift_base/" + std::string(to_string(p)));
    }
    if (m.timeshift_base[Propensity::Never] != 0.0 || m.content_shift_base[Propensity::Never] != 0.0) {
        throw ConfigError("/acceptance_model", "Never propensity must map to probability 0");
    }
    if (!(m.front_page_uplift >= 0.0)) throw ConfigError("/acceptance_model/front_page_uplift", "must be non-negative");
    if (!(m.long_delay_s >= 0.0)) throw ConfigError("/acceptance_model/long_delay_s", "must be non-negative");
}

PopulationSpec parse_population_spec(const Json& doc) {
    JsonObject obj(doc, "");
    PopulationSpec spec;
    auto prob = [](JsonObject& o, std::string_view key, double& out) {
        if (const Json* v = o.optional(key)) out = as_number(*v, o.child(key));
    };
    if (const Json* v = obj.optional("timeshift")) {
        JsonObject ts(*v, "/timeshift");
        prob(ts, "never", spec.timeshift.never);
        prob(ts, "often_or_occasionally", spec.timeshift.often_or_occasionally);
        prob(ts, "na", spec.timeshift.na);
        prob(ts, "often", spec.timeshift.often);
        prob(ts, "occasionally", spec.timeshift.occasionally);
        ts.finish();
    }
    if (const Json* v = obj.optional("per_app_over3h_willingness")) {
        JsonObject pa(*v, "/per_app_over3h_willingness");
        for (AppClass app : all_values<AppClass>()) {
            if (app == AppClass::RemoteWork) continue;  // driven by remote_work_never
            prob(pa, to_string(app), spec.per_app_over3h_willingness[app]);
        }
        pa.finish();
    }
    prob(obj, "remote_work_never", spec.remote_work_never);
    if (const Json* v = obj.optional("content_shift")) {
        JsonObject cs(*v, "/content_shift");
        prob(cs, "never", spec.content_shift.never);
        prob(cs, "occasionally", spec.content_shift.occasionally);
        prob(cs, "often", spec.content_shift.often);
        prob(cs, "na", spec.content_shift.na);
        cs.finish();
    }
    prob(obj, "always_delay", spec.always_delay);
    prob(obj, "never_delay", spec.never_delay);
    if (const Json* v = obj.optional("genre_very_unlikely_to_delay")) {
        JsonObject gb(*v, "/genre_very_unlikely_to_delay");
        for (Genre g : all_values<Genre>()) {
            if (g == Genre::None) continue;
            prob(gb, genre_key(g), spec.genre_very_unlikely_to_delay[g]);
        }
        gb.finish();
    }
    if (const Json* v = obj.optional("incentive_popularity")) {
        JsonObject ip(*v, "/incentive_popularity");
        for (IncentiveKind k : all_values<IncentiveKind>()) {
            prob(ip, kIncentiveKeys[static_cast<std::size_t>(k)], spec.incentive_popularity[k]);
        }
        ip.finish();
    }
    prob(obj, "front_page_watcher", spec.front_page_watcher);
    prob(obj, "vod_everyday", spec.vod_everyday);
    prob(obj, "specific_video_intent", spec.specific_video_intent);
    if (const Json* v = obj.optional("acceptance_model")) {
        JsonObject am(*v, "/acceptance_model");
        for (auto [key, target] : {std::pair{"timeshift_base", &spec.acceptance.timeshift_base},
                                   std::pair{"content_shift_base", &spec.acceptance.content_shift_base}}) {
            if (const Json* b = am.optional(key)) {
                JsonObject bases(*b, am.child(key));
                for (Propensity p : all_values<Propensity>()) prob(bases, to_string(p), (*target)[p]);
                bases.finish();
            }
        }
        if (const Json* b = am.optional("content_shift_uses_incentive")) {
            spec.acceptance.content_shift_uses_incentive = as_bool(*b, am.child("content_shift_uses_incentive"));
        }
        prob(am, "front_page_uplift", spec.acceptance.front_page_uplift);
        prob(am, "long_delay_s", spec.acceptance.long_delay_s);
        am.finish();
    }
    obj.finish();
    validate(spec);
    return spec;
}

Json to_json(const PopulationSpec& spec) {
    Json per_app = Json::object();
    for (AppClass app : all_values<AppClass>()) {
        if (app != AppClass::RemoteWork) per_app[std::string(to_string(app))] = spec.per_app_over3h_willingness[app];
    }
    Json genres = Json::object();
    for (Genre g : all_values<Genre>()) {
        if (g != Genre::None) genres[genre_key(g)] = spec.genre_very_unlikely_to_delay[g];
    }
    Json incentives = Json::object();
    for (IncentiveKind k : all_values<IncentiveKind>()) {
        incentives[std::string(kIncentiveKeys[static_cast<std::size_t>(k)])] = spec.incentive_popularity[k];
    }
    auto bases = [](const EnumMap<Propensity, double>& m) {
        Json out = Json::object();
        for (Propensity p : all_values<Propensity>()) out[std::string(to_string(p))] = m[p];
        return out;
    };
    const auto& ts = spec.timeshift;
    const auto& cs = spec.content_shift;
    return {
        {"timeshift",
         {{"never", ts.never}, {"often_or_occasionally", ts.often_or_occasionally}, {"na", ts.na},
          {"often", ts.often}, {"occasionally", ts.occasionally}}},
        {"per_app_over3h_willingness", per_app},
        {"remote_work_never", spec.remote_work_never},
        {"content_shift", {{"never", cs.never}, {"occasionally", cs.occasionally}, {"often", cs.often}, {"na", cs.na}}},
        {"always_delay", spec.always_delay},
        {"never_delay", spec.never_delay},
        {"genre_very_unlikely_to_delay", genres},
        {"incentive_popularity", incentives},
        {"front_page_watcher", spec.front_page_watcher},
        {"vod_everyday", spec.vod_everyday},
        {"specific_video_intent", spec.specific_video_intent},
        {"acceptance_model",
         {{"timeshift_base", bases(spec.acceptance.timeshift_base)},
          {"content_shift_base", bases(spec.acceptance.content_shift_base)},
          {"content_shift_uses_incentive", spec.acceptance.content_shift_uses_incentive},
          {"front_page_uplift", spec.acceptance.front_page_uplift},
          {"long_delay_s", spec.acceptance.long_delay_s}}},
    };
}

std::vector<UserProfile> sample_population(const PopulationSpec& spec, std::size_t n, std::uint64_t seed) {
    validate(spec);
    Rng rng(derive_seed(seed, {0x9090ULL}));
    std::vector<UserProfile> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        UserProfile& p = out[i];
        p.user_id = i;

        // N/A answers are treated as Never.
        double u = uniform01(rng);
        const auto& ts = spec.timeshift;
        if (u < ts.often) p.timeshift_propensity = Propensity::Often;
        else if (u < ts.often + ts.occasionally) p.timeshift_propensity = Propensity::Occasionally;
        else p.timeshift_propensity = Propensity::Never;
        p.timeshift_na = u >= ts.often + ts.occasionally + ts.never;

        for (AppClass app : all_values<AppClass>()) {
            const double willing =
                app == AppClass::RemoteWork ? 1.0 - spec.remote_work_never : spec.per_app_over3h_willingness[app];
            p.per_app_over3h_willingness[app] = bernoulli(rng, willing) ? 1.0 : 0.0;
        }

        u = uniform01(rng);
        const auto& cs = spec.content_shift;
        if (u < cs.often) p.content_shift_propensity = Propensity::Often;
        else if (u < cs.often + cs.occasionally) p.content_shift_propensity = Propensity::Occasionally;
        else p.content_shift_propensity = Propensity::Never;
        p.content_shift_na = u >= cs.often + cs.occasionally + cs.never;

        u = uniform01(rng);
        if (u < spec.always_delay) p.video_delay = VideoDelayAttitude::Always;
        else if (u < spec.always_delay + spec.never_delay) p.video_delay = VideoDelayAttitude::Never;
        else p.video_delay = VideoDelayAttitude::Sometimes;

        for (Genre g : all_values<Genre>()) p.genre_delay_block[g] = bernoulli(rng, spec.genre_very_unlikely_to_delay[g]);
        for (IncentiveKind k : all_values<IncentiveKind>()) {
            p.incentive_weight[k] = bernoulli(rng, spec.incentive_popularity[k]) ? 1.0 : 0.0;
        }

        u = uniform01(rng);
        p.specific_video_intent = u < spec.specific_video_intent;
        p.front_page_watcher = !p.specific_video_intent && u < spec.specific_video_intent + spec.front_page_watcher;
        p.vod_everyday = bernoulli(rng, spec.vod_everyday);
    }
    return out;
}

ChoiceKind kind_of(const UserChoice& choice) {
    return static_cast<ChoiceKind>(choice.index());
}

std::optional<TimeRange> next_off_peak(double arrival_s, const OfferOptions& options) {
    const double wall = arrival_s + options.clock_offset_s;
    const double day_start = std::floor(wall / kSecondsPerDay) * kSecondsPerDay;
    const double length = options.off_peak_window.length();
    for (int k = -1; k <= 1; ++k) {
        const double start = day_start + k * kSecondsPerDay + options.off_peak_window.start_s;
        const double end = start + length;
        if (end <= wall) continue;
        TimeRange range{std::max(start, wall) - options.clock_offset_s, end - options.clock_offset_s};
        if (options.latest_access_s) range.end = std::min(range.end, *options.latest_access_s);
        if (range.end <= range.begin || range.end <= arrival_s) return std::nullopt;
        return range;
    }
    return std::nullopt;
}

double delay_probability(const UserProfile& profile, const IncentiveOffer& offer, const Request& request,
                         const OfferOptions& options, const AcceptanceModel& model) {
    if (!options.kinds.contains(ChoiceKind::Delay)) return 0.0;
    if (profile.timeshift_propensity == Propensity::Never) return 0.0;
    if (profile.genre_delay_block[request.genre]) return 0.0;
    const auto range = next_off_peak(request.arrival_s, options);
    if (!range) return 0.0;

    double base = model.timeshift_base[profile.timeshift_propensity];
    if (is_video(request.app)) {
        if (profile.video_delay == VideoDelayAttitude::Never) return 0.0;
        if (profile.video_delay == VideoDelayAttitude::Always) base = model.timeshift_base[Propensity::Often];
    }
    const double app_factor =
        range->begin - request.arrival_s > model.long_delay_s ? profile.per_app_over3h_willingness[request.app] : 1.0;
    return base * profile.incentive_weight[offer.kind] * app_factor;
}

double content_shift_probability(const UserProfile& profile, const IncentiveOffer& offer,
                                 const OfferOptions& options, const AcceptanceModel& model, double uplift) {
    if (!options.kinds.contains(ChoiceKind::ShiftContent) || !options.alternative_content_id) return 0.0;
    double p = model.content_shift_base[profile.content_shift_propensity] * uplift;
    if (model.content_shift_uses_incentive) p *= profile.incentive_weight[offer.kind];
    return std::min(p, 1.0);
}

UserChoice respond(const UserProfile& profile, const IncentiveOffer& offer, const Request& request,
                   const OfferOptions& options, const AcceptanceModel& model, Rng& rng) {
    const double u_delay = uniform01(rng);
    const double u_shift = uniform01(rng);
    const double u_time = uniform01(rng);

    if (u_delay < delay_probability(profile, offer, request, options, model)) {
        const auto range = next_off_peak(request.arrival_s, options);
        double t = range->begin + u_time * (range->end - range->begin);
        if (t <= request.arrival_s) t = std::nextafter(request.arrival_s, range->end);
        return DelayChoice{t};
    }
    if (u_shift < content_shift_probability(profile, offer, options, model)) {
        return ShiftContentChoice{*options.alternative_content_id};
    }
    return ContinueChoice{};
}

std::optional<std::string> pick_alternative(std::span<const CatalogItem> catalog, const Request& request,
                                            const UserProfile& profile) {
    if (profile.content_shift_propensity == Propensity::Never) return std::nullopt;
    const CatalogItem* fallback = nullptr;
    for (const auto& item : catalog) {
        if (item.content_id == request.content_id) continue;
        if (item.genre == request.genre) return item.content_id;
        if (fallback == nullptr) fallback = &item;
    }
    if (profile.specific_video_intent || fallback == nullptr) return std::nullopt;
    return fallback->content_id;
}

}  // namespace staggercast
