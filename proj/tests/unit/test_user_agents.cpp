#include <doctest.h>

#include <staggercast/errors.hpp>
#include <staggercast/user_agents.hpp>

#include <cmath>

using namespace staggercast;

namespace {

UserProfile willing_profile() {
    UserProfile p;
    p.timeshift_propensity = Propensity::Often;
    p.content_shift_propensity = Propensity::Occasionally;
    for (auto app : all_values<AppClass>()) p.per_app_over3h_willingness[app] = 1.0;
    for (auto k : all_values<IncentiveKind>()) p.incentive_weight[k] = 1.0;
    return p;
}

Request vod_at(double t, Genre g = Genre::Movie) {
    Request r;
    r.app = AppClass::VideoOnDemand;
    r.genre = g;
    r.content_id = "videoondemand/movie/3";
    r.size_bytes = 500'000'000;
    r.arrival_s = t;
    return r;
}

OfferOptions delay_options() {
    OfferOptions o;
    o.kinds = {ChoiceKind::Continue, ChoiceKind::Delay};
    return o;
}

}  // namespace

TEST_CASE("next_off_peak finds the coming window") {
    OfferOptions o;  // window 02:00-06:00, no clock offset
    auto r = next_off_peak(20 * 3600, o);
    REQUIRE(r);
    CHECK(r->begin == 86400 + 7200);
    CHECK(r->end == 86400 + 21600);

    r = next_off_peak(3 * 3600, o);  // already inside
    REQUIRE(r);
    CHECK(r->begin == 3 * 3600);
    CHECK(r->end == 21600);

    o.latest_access_s = 86400;
    CHECK_FALSE(next_off_peak(20 * 3600, o));

    OfferOptions shifted;
    shifted.clock_offset_s = 21600;  // t = 0 is 06:00
    shifted.latest_access_s = 86400;
    r = next_off_peak(14 * 3600, shifted);  // 20:00 wall
    REQUIRE(r);
    CHECK(r->begin == 72000);
    CHECK(r->end == 86400);
}

TEST_CASE("delay probability terms") {
    const auto opts = delay_options();
    IncentiveOffer offer{IncentiveKind::ZeroRating, 1, 300};
    auto p = willing_profile();
    const auto q = vod_at(20 * 3600);
    CHECK(delay_probability(p, offer, q, opts, {}) == doctest::Approx(0.8));

    p.incentive_weight[IncentiveKind::ZeroRating] = 0.5;
    CHECK(delay_probability(p, offer, q, opts, {}) == doctest::Approx(0.4));

    auto blocked = willing_profile();
    blocked.genre_delay_block[Genre::Movie] = true;
    CHECK(delay_probability(blocked, offer, q, opts, {}) == 0.0);

    auto never = willing_profile();
    never.timeshift_propensity = Propensity::Never;
    CHECK(delay_probability(never, offer, q, opts, {}) == 0.0);

    auto no_video = willing_profile();
    no_video.video_delay = VideoDelayAttitude::Never;
    CHECK(delay_probability(no_video, offer, q, opts, {}) == 0.0);

    auto always = willing_profile();
    always.timeshift_propensity = Propensity::Occasionally;
    always.video_delay = VideoDelayAttitude::Always;
    CHECK(delay_probability(always, offer, q, opts, {}) == doctest::Approx(0.8));

    // Six hours to the window: per-app willingness gates it.
    auto unwilling = willing_profile();
    unwilling.per_app_over3h_willingness[AppClass::VideoOnDemand] = 0.0;
    CHECK(delay_probability(unwilling, offer, q, opts, {}) == 0.0);
    // Inside the window the delay is short, so the gate does not apply.
    CHECK(delay_probability(unwilling, offer, vod_at(3 * 3600), opts, {}) == doctest::Approx(0.8));

    OfferOptions continue_only;
    CHECK(delay_probability(willing_profile(), offer, q, continue_only, {}) == 0.0);
}

TEST_CASE("Monte Carlo delay acceptance matches base times weight") {
    auto p = willing_profile();
    p.incentive_weight[IncentiveKind::ZeroRating] = 0.5;
    IncentiveOffer offer{IncentiveKind::ZeroRating, 1, 300};
    const auto opts = delay_options();
    const auto q = vod_at(20 * 3600);
    Rng rng(2024);
    int delays = 0;
    const int trials = 100'000;
    for (int i = 0; i < trials; ++i) {
        const auto c = respond(p, offer, q, opts, {}, rng);
        if (kind_of(c) == ChoiceKind::Delay) {
            ++delays;
            const double t = std::get<DelayChoice>(c).new_access_s;
            CHECK(t >= 86400 + 7200);
            CHECK(t < 86400 + 21600);
        }
    }
    CHECK(std::abs(static_cast<double>(delays) / trials - 0.40) <= 0.01);
}

TEST_CASE("respond consumes exactly three draws") {
    IncentiveOffer offer{IncentiveKind::ZeroRating, 1, 300};
    Rng a(5);
    Rng b(5);
    (void)respond(willing_profile(), offer, vod_at(0), delay_options(), {}, a);
    b.discard(3);
    CHECK(a() == b());
}

TEST_CASE("content shift needs a cached alternative") {
    IncentiveOffer offer{IncentiveKind::ZeroRating, 1, 300};
    OfferOptions o;
    o.kinds = {ChoiceKind::Continue, ChoiceKind::ShiftContent};
    const auto p = willing_profile();
    CHECK(content_shift_probability(p, offer, o, {}) == 0.0);
    o.alternative_content_id = "videoondemand/movie/0";
    CHECK(content_shift_probability(p, offer, o, {}) == doctest::Approx(0.2));
    CHECK(content_shift_probability(p, offer, o, {}, 3.0) == doctest::Approx(0.6));
    AcceptanceModel no_incentive;
    no_incentive.content_shift_uses_incentive = false;
    auto cold = p;
    cold.incentive_weight[IncentiveKind::ZeroRating] = 0.0;
    CHECK(content_shift_probability(cold, offer, o, {}) == 0.0);
    CHECK(content_shift_probability(cold, offer, o, no_incentive) == doctest::Approx(0.2));
}

TEST_CASE("pick_alternative prefers the same genre") {
    std::vector<CatalogItem> cat{{"a", Genre::Sport, 1}, {"b", Genre::Movie, 1}, {"c", Genre::Movie, 1}};
    auto p = willing_profile();
    auto q = vod_at(0);
    q.content_id = "b";
    CHECK(pick_alternative(cat, q, p) == "c");
    q.genre = Genre::Music;
    CHECK(pick_alternative(cat, q, p) == "a");
    p.specific_video_intent = true;
    CHECK_FALSE(pick_alternative(cat, q, p));
    p.specific_video_intent = false;
    p.content_shift_propensity = Propensity::Never;
    CHECK_FALSE(pick_alternative(cat, q, p));
    CHECK_FALSE(pick_alternative({}, q, willing_profile()));
}

TEST_CASE("sampled population reproduces the survey marginals") {
    const PopulationSpec spec;
    const auto pop = sample_population(spec, 10'000, 1);
    double never_ts = 0, cs_never = 0, cs_occ = 0, cs_often = 0, sport = 0, movie = 0, front = 0, specific = 0;
    for (const auto& p : pop) {
        never_ts += p.timeshift_propensity == Propensity::Never && !p.timeshift_na;
        cs_never += p.content_shift_propensity == Propensity::Never && !p.content_shift_na;
        cs_occ += p.content_shift_propensity == Propensity::Occasionally;
        cs_often += p.content_shift_propensity == Propensity::Often;
        sport += p.genre_delay_block[Genre::Sport];
        movie += p.genre_delay_block[Genre::Movie];
        front += p.front_page_watcher;
        specific += p.specific_video_intent;
        CHECK_FALSE((p.front_page_watcher && p.specific_video_intent));
    }
    const double n = 10'000;
    CHECK(std::abs(never_ts / n - 0.28) <= 0.02);
    CHECK(std::abs(cs_never / n - 0.30) <= 0.02);
    CHECK(std::abs(cs_occ / n - 0.56) <= 0.02);
    CHECK(std::abs(cs_often / n - 0.06) <= 0.02);
    CHECK(std::abs(sport / n - 0.44) <= 0.02);
    CHECK(std::abs(movie / n - 0.19) <= 0.02);
    CHECK(std::abs(front / n - 0.08) <= 0.02);
    CHECK(std::abs(specific / n - 0.51) <= 0.02);
    for (std::size_t i = 0; i < pop.size(); ++i) CHECK(pop[i].user_id == i);
    CHECK(sample_population(spec, 100, 1) == std::vector<UserProfile>(pop.begin(), pop.begin() + 100));
}

TEST_CASE("population spec JSON round-trips and validates") {
    const PopulationSpec spec;
    CHECK(parse_population_spec(to_json(spec)) == spec);
    auto doc = to_json(spec);
    doc["content_shift"]["occasionally"] = 0.76;  // categories now sum to 1.2
    try {
        parse_population_spec(doc);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.path() == "/content_shift");
    }
    doc = to_json(spec);
    doc["genre_very_unlikely_to_delay"]["sport"] = 1.4;
    CHECK_THROWS_AS(parse_population_spec(doc), ConfigError);
}
