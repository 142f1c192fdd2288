#include "staggercast/json_fields.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace staggercast {

double time_of_day(double t) {
    double tod = std::fmod(t, kSecondsPerDay);
    if (tod < 0) tod += kSecondsPerDay;
    // fmod of a value just below a multiple of the day can round up to 86400.
    return tod >= kSecondsPerDay ? 0.0 : tod;
}

JsonObject::JsonObject(const Json& value, std::string path) : value_(value), path_(std::move(path)) {
    if (!value_.is_object()) throw ConfigError(path_, "expected an object");
}

const Json& JsonObject::required(std::string_view key) {
    const Json* found = optional(key);
    if (found == nullptr) throw ConfigError(child(key), "missing required field");
    return *found;
}

const Json* JsonObject::optional(std::string_view key) {
    seen_.emplace(key);
    auto it = value_.find(std::string(key));
    if (it == value_.end() || it->is_null()) return nullptr;
    return &*it;
}

void JsonObject::finish() const {
    for (const auto& [key, _] : value_.items()) {
        if (!key.empty() && key.front() == '_') continue;
        if (!seen_.contains(key)) throw ConfigError(child(key), "unknown field");
    }
}

double as_number(const Json& value, const std::string& path) {
    if (!value.is_number()) throw ConfigError(path, "expected a number");
    const double out = value.get<double>();
    if (!std::isfinite(out)) throw ConfigError(path, "expected a finite number");
    return out;
}

double as_probability(const Json& value, const std::string& path) {
    const double p = as_number(value, path);
    if (p < 0.0 || p > 1.0) throw ConfigError(path, "probability must be in [0, 1]");
    return p;
}

std::uint64_t as_uint(const Json& value, const std::string& path) {
    if (value.is_number_unsigned()) return value.get<std::uint64_t>();
    if (value.is_number_integer()) {
        if (value.get<std::int64_t>() < 0) throw ConfigError(path, "must be non-negative");
        return static_cast<std::uint64_t>(value.get<std::int64_t>());
    }
    if (value.is_number_float()) {
        const double d = value.get<double>();
        if (d >= 0 && std::floor(d) == d && d < 1.8e19) return static_cast<std::uint64_t>(d);
    }
    throw ConfigError(path, "expected a non-negative integer");
}

std::int64_t as_int(const Json& value, const std::string& path) {
    if (value.is_number_integer()) return value.get<std::int64_t>();
    if (value.is_number_float()) {
        const double d = value.get<double>();
        if (std::floor(d) == d && std::abs(d) < 9.2e18) return static_cast<std::int64_t>(d);
    }
    throw ConfigError(path, "expected an integer");
}

bool as_bool(const Json& value, const std::string& path) {
    if (!value.is_boolean()) throw ConfigError(path, "expected a boolean");
    return value.get<bool>();
}

std::string as_string(const Json& value, const std::string& path) {
    if (!value.is_string()) throw ConfigError(path, "expected a string");
    return value.get<std::string>();
}

DayWindow as_window(const Json& value, const std::string& path) {
    if (!value.is_array() || value.size() != 2) throw ConfigError(path, "expected [start_s, end_s]");
    DayWindow w{as_number(value[0], path + "/0"), as_number(value[1], path + "/1")};
    for (double v : {w.start_s, w.end_s}) {
        if (v < 0 || v > kSecondsPerDay) throw ConfigError(path, "window bounds must lie in [0, 86400]");
    }
    if (w.end_s == kSecondsPerDay) w.end_s = 0.0;
    if (time_of_day(w.start_s) == w.end_s) throw ConfigError(path, "window start must differ from end");
    w.start_s = time_of_day(w.start_s);
    return w;
}

Json read_json_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError(file.string(), "cannot open file");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(file.string(), std::string("invalid JSON: ") + e.what());
    }
}

}  // namespace staggercast
