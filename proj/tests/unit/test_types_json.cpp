#include <doctest.h>

#include <staggercast/json_fields.hpp>
#include <staggercast/types.hpp>

using namespace staggercast;

TEST_CASE("DayWindow wraps midnight") {
    DayWindow evening{64800, 82800};
    CHECK(evening.contains(64800));
    CHECK_FALSE(evening.contains(82800));
    CHECK(evening.length() == 18000);

    DayWindow night{79200, 7200};
    CHECK(night.contains(80000));
    CHECK(night.contains(0));
    CHECK_FALSE(night.contains(7200));
    CHECK(night.length() == 14400);
}

TEST_CASE("time_of_day reduces into [0, 86400)") {
    CHECK(time_of_day(0) == 0);
    CHECK(time_of_day(86400) == 0);
    CHECK(time_of_day(90000) == 3600);
    CHECK(time_of_day(-3600) == 82800);
}

TEST_CASE("enum names round-trip") {
    for (auto app : all_values<AppClass>()) CHECK(parse_enum<AppClass>(to_string(app)) == app);
    CHECK_FALSE(parse_enum<AppClass>("Telnet").has_value());
    EnumSet<ChoiceKind> s{ChoiceKind::Continue, ChoiceKind::Delay};
    CHECK(s.size() == 2);
    s.erase(ChoiceKind::Delay);
    CHECK(s == EnumSet<ChoiceKind>{ChoiceKind::Continue});
}

TEST_CASE("JsonObject rejects unknown keys but allows metadata") {
    Json doc = {{"a", 1}, {"_note", "x"}, {"b", 2}};
    JsonObject obj(doc, "/root");
    CHECK(as_number(obj.required("a"), obj.child("a")) == 1);
    try {
        obj.finish();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.path() == "/root/b");
    }
}

TEST_CASE("JSON converters report the offending path") {
    CHECK_THROWS_AS(as_probability(Json(1.5), "/p"), ConfigError);
    CHECK_THROWS_AS(as_uint(Json(-1), "/n"), ConfigError);
    CHECK_THROWS_AS(as_window(Json::array({3600, 3600}), "/w"), ConfigError);
    const auto w = as_window(Json::array({64800, 86400}), "/w");
    CHECK(w.contains(86399));
    CHECK_FALSE(w.contains(0));
    try {
        as_enum<AppClass>(Json("Telnet"), "/0/match/app_classes/0");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.path() == "/0/match/app_classes/0");
    }
}
